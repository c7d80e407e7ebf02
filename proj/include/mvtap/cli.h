#ifndef MVTAP_CLI_H_
#define MVTAP_CLI_H_

#include <ostream>
#include <string>
#include <vector>

namespace mvtap {

// Runs one command line (args[0] is the program name). Errors go to `err` as
// a single line "CODE: detail"; the return value is the process exit code,
// 0 iff the command succeeded.
int RunCli(const std::vector<std::string>& args, std::ostream& out,
           std::ostream& err);

}  // namespace mvtap

#endif  // MVTAP_CLI_H_

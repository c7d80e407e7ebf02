#ifndef MVTAP_PLOT_H_
#define MVTAP_PLOT_H_

#include <optional>
#include <string>
#include <vector>

namespace mvtap {

struct Series {
  std::string name;
  std::vector<double> x;
  std::vector<std::optional<double>> y;  // nullopt leaves a gap
};

// Tab-separated columns "series x y", one row per point, preceded by
// "# key=value" comment lines. Undefined values print as "nan".
std::string SeriesToTsv(const std::vector<Series>& series,
                        const std::vector<std::string>& comments);

struct PlotSpec {
  std::string title;
  std::string x_label;
  std::string y_label;
  bool log2_x = false;
  std::optional<double> y_min;
  std::optional<double> y_max;
  std::vector<std::string> comments;  // embedded as an XML comment
};

// Static line plot with markers and a legend. Output depends only on the
// inputs.
std::string LinePlotSvg(const std::vector<Series>& series, const PlotSpec& spec);

}  // namespace mvtap

#endif  // MVTAP_PLOT_H_

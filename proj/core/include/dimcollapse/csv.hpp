#pragma once

#include <filesystem>
#include <fstream>
#include <string>
#include <string_view>
#include <type_traits>
#include <vector>

namespace dimcollapse::csv {

// Reals use 17 significant digits ("%.17g") so files round-trip and diff exactly.
std::string format_real(double v);

class Writer {
 public:
  explicit Writer(const std::filesystem::path& path);

  void header(const std::vector<std::string>& columns);
  void begin_row();
  void field(double v);
  void field(long long v);
  void field(std::string_view v);
  void end_row();

  template <typename... Ts>
  void row(const Ts&... values) {
    begin_row();
    (field_any(values), ...);
    end_row();
  }

 private:
  template <typename T>
  void field_any(const T& v) {
    if constexpr (std::is_floating_point_v<T>) {
      field(static_cast<double>(v));
    } else if constexpr (std::is_integral_v<T>) {
      field(static_cast<long long>(v));
    } else {
      field(std::string_view(v));
    }
  }

  std::ofstream out_;
  std::filesystem::path path_;
  bool first_ = true;
};

// Headerless numeric CSV, one vector per row. Blank lines are skipped.
std::vector<std::vector<double>> read_numeric_rows(const std::filesystem::path& path);

}  // namespace dimcollapse::csv

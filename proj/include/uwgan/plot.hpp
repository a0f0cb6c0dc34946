#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace uwgan {

/// Numeric CSV with a header row.
struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<double>> rows;

    int column(const std::string& name) const;  // -1 if absent
};

CsvTable read_csv_table(const std::filesystem::path& path);

/// One line chart per column group (accuracy-like columns apart from the
/// rest) against `step` or `epoch`. Returns the PNG paths written.
std::vector<std::filesystem::path> plot_csv_curves(const CsvTable& table, const std::filesystem::path& out_dir,
                                                   const std::string& stem, int width, int height);

}  // namespace uwgan

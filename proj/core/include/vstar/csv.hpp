#pragma once

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

namespace vstar {

/// Locale-independent CSV writer: "." decimal point, shortest round-trip
/// formatting for doubles, one header row.
class CsvWriter {
public:
    CsvWriter(const std::filesystem::path& path, const std::vector<std::string>& header);

    void row(const std::vector<std::string>& cells);

    static std::string format_double(double v);

private:
    std::ofstream out_;
    std::size_t columns_;
};

}  // namespace vstar

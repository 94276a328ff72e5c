#pragma once

#include <concepts>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

namespace muonlab {

/// 17 significant digits, "inf"/"-inf"/"nan" for non-finite values.
std::string format_double(double x);

/// Minimal CSV writer: UTF-8, header row, '.' decimal separator, LF line ends.
/// Cells are written verbatim; callers only pass identifiers and numbers.
class CsvWriter {
public:
    CsvWriter(const std::filesystem::path& path, const std::vector<std::string>& header);

    CsvWriter& cell(const std::string& value);
    CsvWriter& cell(const char* value) { return cell(std::string(value)); }
    CsvWriter& cell(double value);
    template <std::integral I>
        requires(!std::same_as<I, bool>)
    CsvWriter& cell(I value) {
        return cell(std::to_string(value));
    }
    void end_row();

    std::size_t rows() const { return rows_; }
    /// Flushes and throws IoError if anything failed.
    void close();

private:
    std::filesystem::path path_;
    std::ofstream out_;
    std::size_t columns_;
    std::size_t pending_ = 0;
    std::size_t rows_ = 0;
};

} // namespace muonlab

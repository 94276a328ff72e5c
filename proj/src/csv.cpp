#include "muonlab/csv.hpp"

#include <cmath>
#include <cstdio>

#include "muonlab/errors.hpp"

namespace muonlab {

std::string format_double(double x) {
    if (std::isnan(x)) {
        return "nan";
    }
    if (std::isinf(x)) {
        return x > 0 ? "inf" : "-inf";
    }
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

CsvWriter::CsvWriter(const std::filesystem::path& path, const std::vector<std::string>& header)
    : path_(path), out_(path, std::ios::binary | std::ios::trunc), columns_(header.size()) {
    if (!out_) {
        throw IoError("cannot open " + path.string() + " for writing");
    }
    for (std::size_t i = 0; i < header.size(); ++i) {
        out_ << (i ? "," : "") << header[i];
    }
    out_ << '\n';
}

CsvWriter& CsvWriter::cell(const std::string& value) {
    if (pending_ == columns_) {
        throw IoError(path_.string() + ": too many cells in row");
    }
    out_ << (pending_ ? "," : "") << value;
    ++pending_;
    return *this;
}

CsvWriter& CsvWriter::cell(double value) { return cell(format_double(value)); }

void CsvWriter::end_row() {
    if (pending_ != columns_) {
        throw IoError(path_.string() + ": row has " + std::to_string(pending_) + " cells, expected " +
                      std::to_string(columns_));
    }
    out_ << '\n';
    pending_ = 0;
    ++rows_;
}

void CsvWriter::close() {
    out_.flush();
    if (!out_) {
        throw IoError("write failed for " + path_.string());
    }
    out_.close();
}

} // namespace muonlab

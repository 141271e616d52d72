#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "ca50/types.hpp"

namespace ca50::io {

// Plain-text key/value table: one key per line followed by whitespace-
// separated values; '#' starts a comment.  Duplicate keys are rejected.
class KeyValueFile {
  public:
    static KeyValueFile parse_file(const std::string& path);
    static KeyValueFile parse_text(const std::string& text,
                                   const std::string& origin = "<text>");

    bool has(const std::string& key) const;
    const std::vector<std::string>& tokens(const std::string& key) const;
    std::string get_string(const std::string& key) const;
    double get_double(const std::string& key) const;
    long get_long(const std::string& key) const;
    std::vector<double> get_doubles(const std::string& key,
                                    std::size_t expected_count) const;
    double get_double_or(const std::string& key, double fallback) const;

    // Throws ConfigError when a key outside `allowed` is present.
    void require_known_keys(const std::vector<std::string>& allowed) const;

    std::vector<std::string> keys_in_order() const { return order_; }
    const std::string& origin() const { return origin_; }

  private:
    std::map<std::string, std::vector<std::string>> entries_;
    std::vector<std::string> order_;
    std::string origin_;
};

// Coefficient table: cylinder-indexed columns for c1..c9, single values
// for the shared combustion coefficients and k_c.  The loader binds the
// published unit convention; any unit-override key is rejected.
CoefficientSet load_coefficients(const std::string& path);
// `header_comment` lines, if any, are written as leading '#' comments.
void save_coefficients(const std::string& path, const CoefficientSet& set,
                       const std::string& header_comment = "");

std::uint64_t fnv1a_file_checksum(const std::string& path);

// Cycle-record streams as delimited text with one header row, preceded
// by '#' attribution lines (seed, preset, coefficient checksum).
struct RecordFileHeader {
    std::uint64_t seed = 0;
    std::string preset;
    std::string controller;
    std::uint64_t coefficients_checksum = 0;
};

void write_records_csv(const std::string& path, const RecordFileHeader& header,
                       const std::vector<CycleRecord>& records);
std::vector<CycleRecord> read_records_csv(const std::string& path,
                                          RecordFileHeader* header = nullptr);

std::string format_double(double v);  // stable %.12g formatting

}  // namespace ca50::io

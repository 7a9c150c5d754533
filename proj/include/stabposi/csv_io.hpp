#pragma once

// Dense numeric CSV and the fixed-width number format shared by every output
// file. The header line is optional on input: a first line with any
// non-numeric field is skipped.

#include "stabposi/linmodel.hpp"

#include <istream>
#include <string>
#include <vector>

namespace stabposi {

/// Throws ParseError on ragged rows, bad numbers or an empty file.
Matrix read_matrix_csv(std::istream& in, const std::string& source = "<stream>");
Matrix read_matrix_csv_file(const std::string& path);

/// A single column or a single row, as a vector.
Vector read_vector_csv_file(const std::string& path);

void write_matrix_csv(std::ostream& out, const Matrix& m,
                      const std::vector<std::string>& header = {});

/// Shortest round-trip decimal; "inf", "-inf", "nan" for non-finite values.
std::string format_number(double v);

/// Splits one CSV line on commas, trimming blanks around each field.
std::vector<std::string> split_csv_line(const std::string& line);

/// Strict full-string conversion; throws ParseError.
double parse_number(const std::string& field, const std::string& context);

}  // namespace stabposi

#pragma once

#include <filesystem>
#include <string>

#include "qdt/mat.hpp"

namespace qdt {

// Headerless row-major CSV with 17-significant-digit decimals; round-trips
// doubles bit-exactly.
void write_csv(const std::filesystem::path& path, const Mat& m);
Mat read_csv(const std::filesystem::path& path);

std::string format_g17(double x);

}  // namespace qdt

#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace nft::csv {

/// 17 significant digits, so values round-trip exactly.
std::string num(double v);

/// Reads a numeric CSV whose header must equal `columns`. Returns the rows.
std::vector<std::vector<double>> read(const std::filesystem::path& path, const std::vector<std::string>& columns);

}  // namespace nft::csv

#pragma once

#include <filesystem>
#include <iosfwd>

#include "barfiq/parameters.hpp"

namespace barfiq::checkpoint {

inline constexpr std::uint32_t kVersion = 1;

// "BARQ", u32 version, u32 entry count, then per entry (sorted by name):
// u32 name length, name bytes, u64 rows, u64 cols, rows·cols f64 values.
// All integers and floats little-endian.
void save(const ParameterSet& params, std::ostream& out);
void save(const ParameterSet& params, const std::filesystem::path& path);

/// Loads into an already-constructed ParameterSet. Every stored entry must
/// match an existing parameter or buffer by name and shape, and vice versa.
void load(ParameterSet& params, std::istream& in);
void load(ParameterSet& params, const std::filesystem::path& path);

}  // namespace barfiq::checkpoint

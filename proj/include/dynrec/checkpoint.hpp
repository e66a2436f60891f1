#pragma once

#include <map>
#include <string>

#include "dynrec/array.hpp"

namespace dynrec {

// Single-file container of named arrays. Layout, all little-endian:
//   magic "DYNLLM01"
//   repeated entries until EOF:
//     u32 name length, name bytes, u32 rank, u32 dims..., 8-byte doubles
void save_arrays(const std::string& path, const std::map<std::string, Array>& arrays);
std::map<std::string, Array> load_arrays(const std::string& path);

}  // namespace dynrec

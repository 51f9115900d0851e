#pragma once

#include <filesystem>
#include <string_view>

namespace ofds {

// Writes to "<path>.tmp" and renames over path.
void write_file_atomic(const std::filesystem::path& path, std::string_view bytes);

}  // namespace ofds

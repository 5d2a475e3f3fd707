// Copyright 2026 The qelim Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

// Whole-file I/O with atomic replacement, plus the CRC32 used by checkpoints
// and run manifests.

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace qelim::io {

using Bytes = std::vector<std::uint8_t>;

/// IEEE CRC32 (the zlib polynomial).
std::uint32_t crc32(std::span<const std::uint8_t> data);
std::uint32_t crc32(std::string_view data);

/// Throws Error(kIo) if the file cannot be opened or read.
Bytes read_file(const std::filesystem::path& path);
std::string read_text(const std::filesystem::path& path);

/// Writes to a sibling temporary file, then renames it over `path`.
void write_file_atomic(const std::filesystem::path& path, std::span<const std::uint8_t> data);
void write_text_atomic(const std::filesystem::path& path, std::string_view text);

/// Shortest decimal form that round-trips to the same double.
std::string format_double(double v);

/// Eight lowercase hex digits.
std::string hex32(std::uint32_t v);

}  // namespace qelim::io

#pragma once

#include <cstdint>
#include <string_view>

namespace flowcll {

/// SplitMix64 finalizer; used to decorrelate derived seeds.
std::uint64_t mix64(std::uint64_t x);

/// Seed for the r-th repeat of a master seed. repeat_seed(s, 0) == s, so a
/// single-repeat run reproduces the plain split/train path exactly.
std::uint64_t repeat_seed(std::uint64_t master, std::uint64_t repeat);

/// Seed for an indexed sub-stream (tree index, tube index, ...).
std::uint64_t stream_seed(std::uint64_t master, std::uint64_t index);

/// FNV-1a over the bytes of a string.
std::uint64_t hash_string(std::string_view s);

} // namespace flowcll

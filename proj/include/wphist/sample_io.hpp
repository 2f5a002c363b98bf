#pragma once

#include <filesystem>

#include "wphist/sampler.hpp"

namespace wphist {

/// Binary posterior sample file:
///   magic "WPH1",
///   u32 V, T, M (little endian),
///   M row-major float64 V x T surfaces,
///   V' x T float64 inclusion means,
///   UTF-8 JSON metadata trailer,
///   u64 trailer byte length as the final 8 bytes.
void write_samples(const std::filesystem::path& path,
                   const PosteriorSamples& samples);

/// Reads a sample file; packet draws are not persisted and come back
/// empty. Corrupt files (magic, size bookkeeping, trailer) raise
/// PersistenceError.
PosteriorSamples read_samples(const std::filesystem::path& path);

} // namespace wphist

#pragma once

#include <cstdint>
#include <span>
#include <string>

namespace bidsel {

// Derives an independent stream seed from a base seed. splitmix64 of the
// (base, stream) pair; stable across platforms so runs reproduce exactly.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream);

// Shortest round-trip decimal representation (std::to_chars). All numeric
// file output goes through this so artifacts are byte-stable.
std::string format_double(double v);

double mean(std::span<const double> xs);
// Population standard deviation (divides by n).
double population_std(std::span<const double> xs);
// Sample standard deviation (divides by n-1); 0 for fewer than 2 values.
double sample_std(std::span<const double> xs);

}  // namespace bidsel

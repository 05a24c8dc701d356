#include "dtcrs/random.hpp"

#include "dtcrs/tree_io.hpp"

namespace dtcrs {

std::uint64_t derive_seed(std::uint64_t seed, std::string_view label) {
  return splitmix64(seed ^ fnv1a64(label));
}

}  // namespace dtcrs

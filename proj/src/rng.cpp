#include "dghl/rng.hpp"

#include <sstream>

#include "dghl/error.hpp"

namespace dghl {
namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace

std::uint64_t derive_seed(std::uint64_t master, Stream stream,
                          std::initializer_list<std::uint64_t> indices) {
  std::uint64_t h = splitmix64(master ^ splitmix64(static_cast<std::uint64_t>(stream)));
  for (std::uint64_t i : indices) h = splitmix64(h ^ splitmix64(i + 0x632be59bd9b4e019ULL));
  return h;
}

std::string Rng::serialize() const {
  std::ostringstream out;
  out << engine_ << ' ' << normal_;
  return out.str();
}

Rng Rng::deserialize(const std::string& text) {
  Rng rng(0);
  std::istringstream in(text);
  in >> rng.engine_ >> rng.normal_;
  if (!in) throw ParseError("rng: corrupt serialized state");
  return rng;
}

}  // namespace dghl

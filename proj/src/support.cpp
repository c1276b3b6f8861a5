#include "luckchain/codec.hpp"
#include "luckchain/crypto.hpp"
#include "luckchain/errors.hpp"
#include "luckchain/rng.hpp"

namespace luckchain {

std::uint64_t derive_seed(std::uint64_t root, std::string_view label,
                          std::uint64_t a, std::uint64_t b) {
  Encoder enc;
  enc.u64(root);
  enc.str(label);
  enc.u64(a);
  enc.u64(b);
  Digest32 d = Sha256::digest(enc.data());
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v = (v << 8) | d[i];
  return v;
}

const char* err_name(Err e) {
  switch (e) {
    case Err::NoRound: return "NoRound";
    case Err::BadLink: return "BadLink";
    case Err::WrongParent: return "WrongParent";
    case Err::TooEarly: return "TooEarly";
    case Err::ConcurrentInvocation: return "ConcurrentInvocation";
    case Err::InsufficientProofs: return "InsufficientProofs";
    case Err::NotCompromised: return "NotCompromised";
    case Err::DuplicateCpu: return "DuplicateCpu";
    case Err::UnknownCpu: return "UnknownCpu";
    case Err::ConfigError: return "ConfigError";
    case Err::Internal: return "Internal";
  }
  return "Unknown";
}

}  // namespace luckchain

#pragma once

#include <optional>
#include <string>

#include "luckchain/ledger.hpp"
#include "luckchain/superblock.hpp"
#include "luckchain/tee.hpp"

namespace luckchain {

// On-disk chain snapshot: everything a standalone verifier needs. The header
// carries the enclave measurement and the vendor registry; the body is the
// canonical chain encoding.
struct ChainSnapshot {
  enum class Mode : std::uint8_t { chain = 0, super_chain = 1 };

  Mode mode = Mode::chain;
  Digest32 measurement{};
  tee::VendorRegistry registry;
  Chain chain;             // mode == chain
  SuperChain super_chain;  // mode == super_chain
};

Bytes encode_snapshot(const ChainSnapshot& snap);

// Structural decode. Registry entries must satisfy cpu_id_for_key and revoked
// ids must be registered; violations are decode failures, not diagnoses.
std::optional<ChainSnapshot> decode_snapshot(std::span<const std::uint8_t> data);

// error receives the reason on failure (unreadable file or corrupt encoding).
std::optional<ChainSnapshot> read_snapshot_file(const std::string& path,
                                                std::string& error);
bool write_snapshot_file(const std::string& path, const ChainSnapshot& snap,
                         std::string& error);

// First entry that fails validation and the name of the failing check;
// nullopt when the snapshot's chain is valid.
struct ChainDiagnosis {
  std::uint64_t index = 0;  // 0-based position in the chain
  std::string check;
};
std::optional<ChainDiagnosis> diagnose_snapshot(const ChainSnapshot& snap);

}  // namespace luckchain

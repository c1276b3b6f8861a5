#include "luckchain/snapshot.hpp"

#include <fstream>

#include "luckchain/errors.hpp"

namespace luckchain {
namespace {

constexpr char kMagic[4] = {'L', 'C', 'H', 'N'};
constexpr std::uint32_t kVersion = 1;

}  // namespace

Bytes encode_snapshot(const ChainSnapshot& snap) {
  Encoder enc;
  enc.raw(std::span<const std::uint8_t>(
      reinterpret_cast<const std::uint8_t*>(kMagic), sizeof kMagic));
  enc.u32(kVersion);
  enc.u8(static_cast<std::uint8_t>(snap.mode));
  enc.raw(snap.measurement);
  enc.u32(static_cast<std::uint32_t>(snap.registry.keys().size()));
  for (const auto& [id, key] : snap.registry.keys()) {
    enc.raw(id);
    enc.raw(key);
  }
  enc.u32(static_cast<std::uint32_t>(snap.registry.revoked_set().size()));
  for (const CpuId& id : snap.registry.revoked_set()) {
    enc.raw(id);
  }
  Bytes body = snap.mode == ChainSnapshot::Mode::chain
                   ? encode_chain(snap.chain)
                   : encode_chain(snap.super_chain);
  enc.raw(body);
  return enc.take();
}

std::optional<ChainSnapshot> decode_snapshot(std::span<const std::uint8_t> data) {
  Decoder dec(data);
  auto magic = dec.fixed<4>();
  if (!dec.ok() || !std::equal(magic.begin(), magic.end(), kMagic)) {
    return std::nullopt;
  }
  if (dec.u32() != kVersion || !dec.ok()) return std::nullopt;
  std::uint8_t mode = dec.u8();
  if (!dec.ok() || mode > 1) return std::nullopt;

  ChainSnapshot snap;
  snap.mode = static_cast<ChainSnapshot::Mode>(mode);
  snap.measurement = dec.fixed<32>();

  std::uint32_t n_keys = dec.u32();
  if (!dec.ok() || n_keys > (1u << 20)) return std::nullopt;
  for (std::uint32_t i = 0; i < n_keys; ++i) {
    CpuId id = dec.fixed<16>();
    Key32 key = dec.fixed<32>();
    if (!dec.ok()) return std::nullopt;
    // The id is a commitment to the key; a mismatch means the snapshot was
    // altered and verification results could not be trusted.
    if (id != tee::cpu_id_for_key(key)) return std::nullopt;
    try {
      snap.registry.add(id, key);
    } catch (const Error&) {
      return std::nullopt;  // duplicate entry
    }
  }
  std::uint32_t n_revoked = dec.u32();
  if (!dec.ok() || n_revoked > (1u << 20)) return std::nullopt;
  for (std::uint32_t i = 0; i < n_revoked; ++i) {
    CpuId id = dec.fixed<16>();
    if (!dec.ok()) return std::nullopt;
    try {
      snap.registry.revoke(id);
    } catch (const Error&) {
      return std::nullopt;  // revocation of an unregistered id
    }
  }

  std::span<const std::uint8_t> rest = data.subspan(data.size() - dec.remaining());
  if (snap.mode == ChainSnapshot::Mode::chain) {
    auto chain = decode_chain(rest);
    if (!chain) return std::nullopt;
    snap.chain = std::move(*chain);
  } else {
    auto chain = decode_superchain(rest);
    if (!chain) return std::nullopt;
    snap.super_chain = std::move(*chain);
  }
  return snap;
}

std::optional<ChainSnapshot> read_snapshot_file(const std::string& path,
                                                std::string& error) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    error = "cannot open file: " + path;
    return std::nullopt;
  }
  Bytes data((std::istreambuf_iterator<char>(in)),
             std::istreambuf_iterator<char>());
  if (in.bad()) {
    error = "read failure: " + path;
    return std::nullopt;
  }
  if (data.empty()) {
    // An empty file is an empty chain.
    return ChainSnapshot{};
  }
  auto snap = decode_snapshot(data);
  if (!snap) {
    error = "corrupt chain encoding: " + path;
    return std::nullopt;
  }
  return snap;
}

bool write_snapshot_file(const std::string& path, const ChainSnapshot& snap,
                         std::string& error) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    error = "cannot open file for writing: " + path;
    return false;
  }
  Bytes data = encode_snapshot(snap);
  out.write(reinterpret_cast<const char*>(data.data()),
            static_cast<std::streamsize>(data.size()));
  out.flush();
  if (!out) {
    error = "write failure: " + path;
    return false;
  }
  return true;
}

std::optional<ChainDiagnosis> diagnose_snapshot(const ChainSnapshot& snap) {
  Digest32 prev = kZeroDigest;
  std::uint64_t index = 0;
  if (snap.mode == ChainSnapshot::Mode::chain) {
    for (const Block* b : snap.chain.entries()) {
      BlockCheck chk = check_block(*b, prev, snap.registry, snap.measurement);
      if (!chk.ok) return ChainDiagnosis{index, chk.what};
      prev = block_digest(*b);
      ++index;
    }
  } else {
    for (const SuperBlock* sb : snap.super_chain.entries()) {
      SuperBlockCheck chk =
          check_superblock(*sb, prev, snap.registry, snap.measurement);
      if (!chk.ok) return ChainDiagnosis{index, chk.what};
      prev = superblock_digest(*sb);
      ++index;
    }
  }
  return std::nullopt;
}

}  // namespace luckchain

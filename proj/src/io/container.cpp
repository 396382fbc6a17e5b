#include "tubelet/io/container.hpp"

#include "tubelet/io/binary.hpp"

namespace tubelet::io {

namespace {
constexpr char kMagic[4] = {'R', 'S', 'T', 'K'};
constexpr uint16_t kVersion = 1;
}  // namespace

void write_container(const std::string& path, const datasim::Dataset& ds) {
  std::vector<uint8_t> out;
  out.insert(out.end(), kMagic, kMagic + 4);
  put_u16(out, kVersion);
  put_u32(out, static_cast<uint32_t>(ds.samples.size()));
  for (const auto& s : ds.samples) {
    const bool has_sar = s.sar.numel() > 0;
    out.push_back(static_cast<uint8_t>(has_sar ? 4 : 3));
    put_tensor_entry(out, "msi_clouded", s.msi_clouded);
    if (has_sar) put_tensor_entry(out, "sar", s.sar);
    put_tensor_entry(out, "mask", s.mask);
    put_tensor_entry(out, "target", s.target);
  }
  write_file_bytes(path, out);
}

datasim::Dataset read_container(const std::string& path) {
  const auto bytes = read_file_bytes(path);
  Reader r(bytes.data(), bytes.size(), "container '" + path + "'");
  const uint8_t* magic = r.take(4);
  if (std::memcmp(magic, kMagic, 4) != 0) {
    throw DataError("container '" + path + "': bad magic");
  }
  const uint16_t version = r.u16();
  if (version != kVersion) {
    throw DataError("container '" + path + "': unsupported version " + std::to_string(version));
  }
  const uint32_t count = r.u32();
  datasim::Dataset ds;
  ds.samples.reserve(count);
  for (uint32_t i = 0; i < count; ++i) {
    const uint8_t n_entries = r.u8();
    if (n_entries < 3 || n_entries > 4) {
      throw DataError("container '" + path + "': sample " + std::to_string(i) + " has " +
                      std::to_string(n_entries) + " entries, expected 3 or 4");
    }
    datasim::Sample s;
    for (uint8_t k = 0; k < n_entries; ++k) {
      TensorEntry e = read_tensor_entry(r, "container '" + path + "'");
      if (e.name == "msi_clouded") {
        s.msi_clouded = std::move(e.tensor);
      } else if (e.name == "sar") {
        s.sar = std::move(e.tensor);
      } else if (e.name == "mask") {
        s.mask = std::move(e.tensor);
      } else if (e.name == "target") {
        s.target = std::move(e.tensor);
      } else {
        throw DataError("container '" + path + "': unknown entry '" + e.name + "'");
      }
    }
    if (s.msi_clouded.numel() == 0 || s.mask.numel() == 0 || s.target.numel() == 0) {
      throw DataError("container '" + path + "': sample " + std::to_string(i) +
                      " is missing a required entry");
    }
    ds.samples.push_back(std::move(s));
  }
  if (r.remaining() != 0) {
    throw DataError("container '" + path + "': trailing bytes after last sample");
  }
  ds.n_train = datasim::train_count(static_cast<int64_t>(ds.samples.size()));
  return ds;
}

}  // namespace tubelet::io

#include "tubelet/io/binary.hpp"

#include <fstream>

namespace tubelet::io {

namespace {
// Anything past this is treated as a corrupt extent rather than a real
// allocation request.
constexpr uint64_t kMaxElements = 1ULL << 31;
}  // namespace

void put_tensor_entry(std::vector<uint8_t>& out, const std::string& name,
                      const core::Tensor& tensor) {
  put_u16(out, static_cast<uint16_t>(name.size()));
  out.insert(out.end(), name.begin(), name.end());
  out.push_back(static_cast<uint8_t>(tensor.rank()));
  for (int64_t e : tensor.shape) put_u32(out, static_cast<uint32_t>(e));
  const size_t payload = tensor.data.size() * 4;
  const size_t base = out.size();
  out.resize(base + payload);
  std::memcpy(out.data() + base, tensor.data.data(), payload);
}

TensorEntry read_tensor_entry(Reader& r, const std::string& context) {
  TensorEntry e;
  const uint16_t name_len = r.u16();
  const uint8_t* nb = r.take(name_len);
  e.name.assign(reinterpret_cast<const char*>(nb), name_len);
  const uint8_t rank = r.u8();
  if (rank > 8) throw DataError(context + ": extent overflow (rank " + std::to_string(rank) + ")");
  core::Shape shape(rank);
  uint64_t numel = 1;
  for (int k = 0; k < rank; ++k) {
    const uint32_t ext = r.u32();
    if (ext == 0) throw DataError(context + ": zero extent in entry '" + e.name + "'");
    shape[static_cast<size_t>(k)] = static_cast<int64_t>(ext);
    numel *= ext;
    if (numel > kMaxElements) {
      throw DataError(context + ": extent overflow in entry '" + e.name + "'");
    }
  }
  if (r.remaining() < numel * 4) throw DataError(context + ": truncated file");
  const uint8_t* payload = r.take(numel * 4);
  std::vector<float> data(numel);
  std::memcpy(data.data(), payload, numel * 4);
  e.tensor = core::Tensor(std::move(shape), std::move(data));
  return e;
}

std::vector<uint8_t> read_file_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path + "' for reading");
  in.seekg(0, std::ios::end);
  const std::streamoff n = in.tellg();
  in.seekg(0, std::ios::beg);
  std::vector<uint8_t> bytes(static_cast<size_t>(n));
  if (n > 0) in.read(reinterpret_cast<char*>(bytes.data()), n);
  if (!in) throw DataError("failed reading '" + path + "'");
  return bytes;
}

void write_file_bytes(const std::string& path, const std::vector<uint8_t>& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot open '" + path + "' for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DataError("failed writing '" + path + "'");
}

}  // namespace tubelet::io

#include "lt/tensor_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include <json.hpp>

#include "lt/error.hpp"

namespace lt {

namespace {

constexpr char kMagic[8] = {'L', 'T', 'T', 'E', 'N', 'S', 'R', '1'};

static_assert(std::endian::native == std::endian::little,
              "payload is written as native f64 and declared little-endian");

[[noreturn]] void corrupt() { throw Error("corrupt tensor file"); }

}  // namespace

void write_tensor_stream(const Tensor& t,
                         const std::optional<std::vector<std::size_t>>& lengths,
                         std::ostream& out) {
  nlohmann::json header;
  header["shape"] = t.shape();
  header["dtype"] = "f64";
  if (lengths) header["lengths"] = *lengths;
  std::string hs = header.dump();
  std::uint32_t hlen = static_cast<std::uint32_t>(hs.size());
  out.write(kMagic, sizeof(kMagic));
  out.write(reinterpret_cast<const char*>(&hlen), sizeof(hlen));
  out.write(hs.data(), static_cast<std::streamsize>(hs.size()));
  out.write(reinterpret_cast<const char*>(t.data()),
            static_cast<std::streamsize>(t.size() * sizeof(double)));
  if (!out) throw Error("tensor write failed");
}

StoredTensor read_tensor_stream(std::istream& in) {
  char magic[8];
  if (!in.read(magic, sizeof(magic)) || std::memcmp(magic, kMagic, 8) != 0) corrupt();
  std::uint32_t hlen = 0;
  if (!in.read(reinterpret_cast<char*>(&hlen), sizeof(hlen))) corrupt();
  std::string hs(hlen, '\0');
  if (!in.read(hs.data(), hlen)) corrupt();

  nlohmann::json header = nlohmann::json::parse(hs, nullptr, /*allow_exceptions=*/false);
  if (header.is_discarded() || !header.contains("shape") || !header.contains("dtype") ||
      header["dtype"] != "f64") {
    corrupt();
  }
  std::vector<std::size_t> shape = header["shape"].get<std::vector<std::size_t>>();

  StoredTensor result;
  result.data = Tensor(shape);
  if (result.data.size() > 0 &&
      !in.read(reinterpret_cast<char*>(result.data.data()),
               static_cast<std::streamsize>(result.data.size() * sizeof(double)))) {
    corrupt();  // truncated payload or header-declared shape larger than payload
  }
  // Shape must account for the whole payload.
  if (in.peek() != std::char_traits<char>::eof()) corrupt();

  if (header.contains("lengths")) {
    result.lengths = header["lengths"].get<std::vector<std::size_t>>();
  }
  return result;
}

void write_tensor(const Tensor& t, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open for write: " + path.string());
  write_tensor_stream(t, std::nullopt, out);
}

void write_batch_grid(const BatchGrid& grid, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open for write: " + path.string());
  write_tensor_stream(grid.data, grid.lengths, out);
}

StoredTensor read_tensor(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open for read: " + path.string());
  return read_tensor_stream(in);
}

BatchGrid read_batch_grid(const std::filesystem::path& path) {
  StoredTensor stored = read_tensor(path);
  if (stored.data.rank() != 3) corrupt();
  BatchGrid grid;
  grid.data = std::move(stored.data);
  if (stored.lengths) {
    grid.lengths = std::move(*stored.lengths);
    if (grid.lengths.size() != grid.batch()) corrupt();
    for (std::size_t len : grid.lengths) {
      if (len < 1 || len > grid.max_frames()) corrupt();
    }
  } else {
    grid.lengths.assign(grid.batch(), grid.max_frames());
  }
  return grid;
}

}  // namespace lt

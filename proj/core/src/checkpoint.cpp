#include "sara/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <set>

#include "json.hpp"

namespace sara {

namespace {

constexpr char kMagic[8] = {'S', 'A', 'R', 'A', 'T', 'N', 'S', 'R'};

void put_u64_le(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i)
    out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

std::uint64_t get_u64_le(const unsigned char* p) {
  std::uint64_t v = 0;
  for (int i = 7; i >= 0; --i) v = (v << 8) | p[i];
  return v;
}

void put_f64_le(std::string& out, double d) {
  std::uint64_t bits;
  std::memcpy(&bits, &d, sizeof(bits));
  put_u64_le(out, bits);
}

double get_f64_le(const unsigned char* p) {
  const std::uint64_t bits = get_u64_le(p);
  double d;
  std::memcpy(&d, &bits, sizeof(d));
  return d;
}

}  // namespace

void save_tensor_file(const std::string& path,
                      const std::vector<TensorRecord>& tensors) {
  nlohmann::ordered_json header = nlohmann::ordered_json::array();
  std::set<std::string> seen;
  std::uint64_t offset = 0;
  for (const TensorRecord& t : tensors) {
    if (t.name.empty()) throw DataError("checkpoint: unnamed tensor");
    if (!seen.insert(t.name).second)
      throw DataError("checkpoint: duplicate tensor name '" + t.name + "'");
    if (t.data.size() != t.rows * t.cols)
      throw DataError("checkpoint: tensor '" + t.name + "' has " +
                      std::to_string(t.data.size()) + " values for shape [" +
                      std::to_string(t.rows) + "x" + std::to_string(t.cols) +
                      "]");
    header.push_back({{"name", t.name},
                      {"shape", {t.rows, t.cols}},
                      {"dtype", "f64"},
                      {"offset", offset}});
    offset += 8 * static_cast<std::uint64_t>(t.data.size());
  }
  const std::string header_json = header.dump();

  std::string blob;
  blob.reserve(16 + header_json.size() + offset);
  blob.append(kMagic, sizeof(kMagic));
  put_u64_le(blob, header_json.size());
  blob += header_json;
  for (const TensorRecord& t : tensors)
    for (double d : t.data) put_f64_le(blob, d);

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("checkpoint: cannot open '" + path + "' for writing");
  out.write(blob.data(), static_cast<std::streamsize>(blob.size()));
  if (!out) throw DataError("checkpoint: short write to '" + path + "'");
}

std::vector<TensorRecord> load_tensor_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("checkpoint: cannot open '" + path + "'");
  std::string blob((std::istreambuf_iterator<char>(in)),
                   std::istreambuf_iterator<char>());
  const auto* bytes = reinterpret_cast<const unsigned char*>(blob.data());

  if (blob.size() < 16 || std::memcmp(blob.data(), kMagic, sizeof(kMagic)) != 0)
    throw DataError("checkpoint: '" + path + "' is not a SARATNSR container");
  const std::uint64_t header_len = get_u64_le(bytes + 8);
  if (16 + header_len > blob.size())
    throw DataError("checkpoint: '" + path + "' truncated header");
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(blob.substr(16, header_len));
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("checkpoint: bad header JSON: ") + e.what());
  }
  if (!header.is_array()) throw DataError("checkpoint: header is not an array");

  const std::size_t payload_start = 16 + header_len;
  const std::size_t payload_size = blob.size() - payload_start;
  std::vector<TensorRecord> tensors;
  std::set<std::string> seen;
  try {
    for (const auto& e : header) {
      TensorRecord t;
      t.name = e.at("name").get<std::string>();
      if (!seen.insert(t.name).second)
        throw DataError("checkpoint: duplicate tensor name '" + t.name + "'");
      if (e.at("dtype").get<std::string>() != "f64")
        throw DataError("checkpoint: tensor '" + t.name + "' has unsupported dtype");
      const auto& shape = e.at("shape");
      if (!shape.is_array() || shape.size() != 2)
        throw DataError("checkpoint: tensor '" + t.name + "' has non rank-2 shape");
      t.rows = shape[0].get<std::size_t>();
      t.cols = shape[1].get<std::size_t>();
      const std::uint64_t offset = e.at("offset").get<std::uint64_t>();
      const std::uint64_t nbytes = 8 * static_cast<std::uint64_t>(t.rows * t.cols);
      if (offset + nbytes > payload_size)
        throw DataError("checkpoint: tensor '" + t.name +
                        "' payload exceeds file size");
      t.data.resize(t.rows * t.cols);
      const unsigned char* p = bytes + payload_start + offset;
      for (std::size_t i = 0; i < t.data.size(); ++i)
        t.data[i] = get_f64_le(p + 8 * i);
      tensors.push_back(std::move(t));
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("checkpoint: malformed header entry: ") + e.what());
  }
  return tensors;
}

}  // namespace sara

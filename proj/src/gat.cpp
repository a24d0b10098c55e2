#include "labelmend/gat.hpp"

#include <cstring>
#include <fstream>

namespace labelmend {

namespace {

constexpr char kModelMagic[4] = {'L', 'M', 'W', '1'};

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int s = 0; s < 32; s += 8) out.push_back(static_cast<std::uint8_t>(v >> s));
}

void put_mat(std::vector<std::uint8_t>& out, const Mat<float>& m) {
  for (float f : m.v) {
    std::uint32_t bits;
    std::memcpy(&bits, &f, 4);
    put_u32(out, bits);
  }
}

std::uint32_t get_u32(const std::uint8_t* p) {
  return p[0] | (p[1] << 8) | (static_cast<std::uint32_t>(p[2]) << 16) |
         (static_cast<std::uint32_t>(p[3]) << 24);
}

}  // namespace

void write_model(const GatModel<float>& model, const std::filesystem::path& path) {
  std::vector<std::uint8_t> out;
  out.insert(out.end(), kModelMagic, kModelMagic + 4);
  put_u32(out, model.heads());
  put_u32(out, model.d_in);
  put_u32(out, model.d_hidden);
  put_u32(out, model.d_att);
  put_u32(out, model.num_classes);
  for (const auto& h : model.layer1) {
    put_mat(out, h.w_query);
    put_mat(out, h.w_key);
    put_mat(out, h.w_value);
  }
  put_mat(out, model.layer2.w_query);
  put_mat(out, model.layer2.w_key);
  put_mat(out, model.layer2.w_value);
  write_bytes(out, path);
}

GatModel<float> read_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) raise(Errc::io_failure, "cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  if (bytes.size() < 24 || std::memcmp(bytes.data(), kModelMagic, 4) != 0)
    raise(Errc::bad_magic, "missing LMW1 magic", 0);
  std::size_t off = 4;
  const std::uint32_t heads = get_u32(bytes.data() + off);
  const std::uint32_t d_in = get_u32(bytes.data() + off + 4);
  const std::uint32_t d_hidden = get_u32(bytes.data() + off + 8);
  const std::uint32_t d_att = get_u32(bytes.data() + off + 12);
  const std::uint32_t num_classes = get_u32(bytes.data() + off + 16);
  off += 20;

  auto get_mat = [&](std::uint32_t rows, std::uint32_t cols) {
    Mat<float> m(rows, cols);
    if (bytes.size() < off + 4ull * m.v.size())
      raise(Errc::truncated_payload, "model file ends early", bytes.size());
    for (auto& f : m.v) {
      const std::uint32_t bits = get_u32(bytes.data() + off);
      std::memcpy(&f, &bits, 4);
      off += 4;
    }
    return m;
  };

  GatModel<float> model;
  model.d_in = d_in;
  model.d_hidden = d_hidden;
  model.d_att = d_att;
  model.num_classes = num_classes;
  model.layer1.resize(heads);
  for (auto& h : model.layer1) {
    h.w_query = get_mat(d_att, d_in);
    h.w_key = get_mat(d_att, d_in);
    h.w_value = get_mat(d_hidden, d_in);
  }
  const std::uint32_t d_mid = heads * d_hidden;
  model.layer2.w_query = get_mat(d_att, d_mid);
  model.layer2.w_key = get_mat(d_att, d_mid);
  model.layer2.w_value = get_mat(num_classes, d_mid);
  return model;
}

}  // namespace labelmend

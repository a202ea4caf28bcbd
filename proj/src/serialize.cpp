#include "prism/serialize.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>

#include "prism/error.hpp"

namespace prism {

namespace {

constexpr char kMagic[8] = {'P', 'R', 'I', 'S', 'M', 'P', '1', '\0'};

template <typename T>
void put(std::ostream &out, T value) {
  unsigned char bytes[sizeof(T)];
  std::memcpy(bytes, &value, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
  out.write(reinterpret_cast<const char *>(bytes), sizeof(T));
}

template <typename T>
T get(std::istream &in) {
  unsigned char bytes[sizeof(T)];
  if (!in.read(reinterpret_cast<char *>(bytes), sizeof(T))) throw Error(Errc::Io, "truncated parameter file");
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
  T value;
  std::memcpy(&value, bytes, sizeof(T));
  return value;
}

void put_matrix(std::ostream &out, const Matrix &m) {
  put<std::uint64_t>(out, static_cast<std::uint64_t>(m.rows()));
  put<std::uint64_t>(out, static_cast<std::uint64_t>(m.cols()));
  for (Eigen::Index i = 0; i < m.size(); ++i) put<double>(out, m.data()[i]);
}

Matrix get_matrix(std::istream &in) {
  const auto rows = get<std::uint64_t>(in);
  const auto cols = get<std::uint64_t>(in);
  if (rows > (1u << 24) || cols > (1u << 24)) throw Error(Errc::Io, "implausible matrix shape in parameter file");
  Matrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = get<double>(in);
  return m;
}

void put_vector(std::ostream &out, const Vector &v) { put_matrix(out, v); }

Vector get_vector(std::istream &in) {
  Matrix m = get_matrix(in);
  if (m.cols() != 1) throw Error(Errc::Io, "expected a column vector in parameter file");
  return m.col(0);
}

}  // namespace

void write_model(std::ostream &out, const Model &model) {
  out.write(kMagic, sizeof kMagic);
  put<std::uint64_t>(out, static_cast<std::uint64_t>(model.meta.facet_count()));
  for (const auto &p : model.meta.projection) put_matrix(out, p);
  for (const auto &b : model.meta.bias) put_vector(out, b);
  put_vector(out, model.meta.alpha);
  put_vector(out, model.meta.attention);
  put<double>(out, model.meta.attention_bias);
  put_matrix(out, model.head.weight);
  put_vector(out, model.head.bias);
}

Model read_model(std::istream &in) {
  char magic[sizeof kMagic];
  if (!in.read(magic, sizeof magic) || std::memcmp(magic, kMagic, sizeof magic) != 0) {
    throw Error(Errc::Io, "not a PRISMP1 parameter file");
  }
  Model model;
  const auto F = get<std::uint64_t>(in);
  if (F > 4096) throw Error(Errc::Io, "implausible facet count in parameter file");
  for (std::uint64_t f = 0; f < F; ++f) model.meta.projection.push_back(get_matrix(in));
  for (std::uint64_t f = 0; f < F; ++f) model.meta.bias.push_back(get_vector(in));
  model.meta.alpha = get_vector(in);
  model.meta.attention = get_vector(in);
  model.meta.attention_bias = get<double>(in);
  model.head.weight = get_matrix(in);
  model.head.bias = get_vector(in);
  return model;
}

void save_model(const std::filesystem::path &path, const Model &model) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(Errc::Io, "cannot write " + path.string());
  write_model(out, model);
  if (!out) throw Error(Errc::Io, "write failed for " + path.string());
}

Model load_model(const std::filesystem::path &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::Io, "cannot open " + path.string());
  return read_model(in);
}

}  // namespace prism

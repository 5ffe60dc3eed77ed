#include "ewe/checkpoint.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

namespace ewe::checkpoint {
namespace {

constexpr char kMagic[] = "EWE1";

void put_f32_le(std::string& out, float value) {
  std::uint32_t bits;
  std::memcpy(&bits, &value, 4);
  out.push_back(static_cast<char>(bits & 0xff));
  out.push_back(static_cast<char>((bits >> 8) & 0xff));
  out.push_back(static_cast<char>((bits >> 16) & 0xff));
  out.push_back(static_cast<char>((bits >> 24) & 0xff));
}

float get_f32_le(const char* p) {
  const auto b = [&](int i) { return static_cast<std::uint32_t>(static_cast<unsigned char>(p[i])); };
  const std::uint32_t bits = b(0) | (b(1) << 8) | (b(2) << 16) | (b(3) << 24);
  float value;
  std::memcpy(&value, &bits, 4);
  return value;
}

}  // namespace

void save_tensors(const std::string& path, const TensorList& tensors) {
  std::set<std::string> seen;
  for (const auto& [name, mat] : tensors) {
    if (name.empty() || name.find_first_of(" \t\n\r") != std::string::npos)
      throw std::runtime_error("checkpoint: bad tensor name '" + name + "'");
    if (!seen.insert(name).second)
      throw std::runtime_error("checkpoint: duplicate tensor name '" + name + "'");
  }

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("checkpoint: cannot open '" + path + "' for writing");
  out << kMagic << '\n';
  for (const auto& [name, mat] : tensors)
    out << "tensor " << name << ' ' << mat.rows() << ' ' << mat.cols() << '\n';
  out << "data\n";
  std::string buf;
  for (const auto& [name, mat] : tensors) {
    buf.clear();
    buf.reserve(static_cast<std::size_t>(mat.size()) * 4);
    for (Eigen::Index i = 0; i < mat.rows(); ++i)
      for (Eigen::Index j = 0; j < mat.cols(); ++j) put_f32_le(buf, mat(i, j));
    out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  }
  if (!out) throw std::runtime_error("checkpoint: write failed for '" + path + "'");
}

TensorList load_tensors(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("checkpoint: cannot open '" + path + "'");

  std::string line;
  if (!std::getline(in, line) || line != kMagic)
    throw std::runtime_error("checkpoint: bad magic in '" + path + "'");

  TensorList tensors;
  std::set<std::string> seen;
  while (std::getline(in, line)) {
    if (line == "data") break;
    std::istringstream ls(line);
    std::string tag, name;
    long long rows = -1, cols = -1;
    if (!(ls >> tag >> name >> rows >> cols) || tag != "tensor" || rows < 0 || cols < 0)
      throw std::runtime_error("checkpoint: malformed manifest line '" + line + "'");
    if (!seen.insert(name).second)
      throw std::runtime_error("checkpoint: duplicate tensor name '" + name + "'");
    tensors.emplace_back(name, Mat<float>(rows, cols));
  }
  if (line != "data") throw std::runtime_error("checkpoint: missing data section in '" + path + "'");

  std::string buf;
  for (auto& [name, mat] : tensors) {
    const std::size_t bytes = static_cast<std::size_t>(mat.size()) * 4;
    buf.resize(bytes);
    if (!in.read(buf.data(), static_cast<std::streamsize>(bytes)))
      throw std::runtime_error("checkpoint: truncated data for tensor '" + name + "'");
    const char* p = buf.data();
    for (Eigen::Index i = 0; i < mat.rows(); ++i)
      for (Eigen::Index j = 0; j < mat.cols(); ++j, p += 4) mat(i, j) = get_f32_le(p);
  }
  if (in.get() != std::char_traits<char>::eof())
    throw std::runtime_error("checkpoint: trailing bytes in '" + path + "'");
  return tensors;
}

}  // namespace ewe::checkpoint

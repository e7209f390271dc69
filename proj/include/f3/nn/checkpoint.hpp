#pragma once

#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "f3/errors.hpp"
#include "f3/nn/params.hpp"

namespace f3::nn {

inline constexpr int kCheckpointVersion = 1;

// Text checkpoint:
//   f3-checkpoint 1
//   meta <key> <value>        (any number, sorted by key)
//   step <n>
//   param <name> <rows> <cols>
//   <row-major values as C99 hex floats, one row per line>
//   end
// Hex floats make the round trip bit-exact.
struct Checkpoint {
  std::map<std::string, std::string> meta;
  std::uint64_t step = 0;
  std::vector<std::pair<std::string, Eigen::MatrixXd>> arrays;

  const Eigen::MatrixXd& array(const std::string& name) const {
    for (const auto& [n, a] : arrays)
      if (n == name) return a;
    throw FormatError("checkpoint has no array '" + name + "'");
  }
  const std::string& meta_at(const std::string& key) const {
    const auto it = meta.find(key);
    if (it == meta.end()) throw FormatError("checkpoint has no meta '" + key + "'");
    return it->second;
  }
};

template <typename Scalar>
void write_checkpoint(std::ostream& out, const ParameterStore<Scalar>& store,
                      const std::map<std::string, std::string>& meta = {}) {
  out << "f3-checkpoint " << kCheckpointVersion << '\n';
  for (const auto& [k, v] : meta) {
    if (k.find_first_of(" \t\n") != std::string::npos || v.find('\n') != std::string::npos) {
      throw FormatError("checkpoint meta key/value has whitespace: " + k);
    }
    out << "meta " << k << ' ' << v << '\n';
  }
  out << "step " << store.step() << '\n';
  char buf[40];
  for (std::size_t i = 0; i < store.size(); ++i) {
    const auto& p = store[i];
    out << "param " << p.name << ' ' << p.value.rows() << ' ' << p.value.cols() << '\n';
    for (Eigen::Index r = 0; r < p.value.rows(); ++r) {
      for (Eigen::Index c = 0; c < p.value.cols(); ++c) {
        std::snprintf(buf, sizeof buf, "%a", static_cast<double>(p.value(r, c)));
        if (c) out << ' ';
        out << buf;
      }
      out << '\n';
    }
  }
  out << "end\n";
}

inline Checkpoint read_checkpoint(std::istream& in) {
  Checkpoint ck;
  std::string line;
  if (!std::getline(in, line)) throw FormatError("empty checkpoint");
  {
    std::istringstream hs(line);
    std::string magic;
    int version = 0;
    hs >> magic >> version;
    if (magic != "f3-checkpoint") throw FormatError("not an f3 checkpoint");
    if (version != kCheckpointVersion) {
      throw FormatError("unsupported checkpoint version " + std::to_string(version));
    }
  }
  bool ended = false;
  while (std::getline(in, line)) {
    if (line == "end") {
      ended = true;
      break;
    }
    std::istringstream ls(line);
    std::string tag;
    ls >> tag;
    if (tag == "meta") {
      std::string key;
      ls >> key;
      std::string value;
      std::getline(ls, value);
      if (!value.empty() && value[0] == ' ') value.erase(0, 1);
      ck.meta[key] = value;
    } else if (tag == "step") {
      ls >> ck.step;
    } else if (tag == "param") {
      std::string name;
      Eigen::Index rows = 0, cols = 0;
      if (!(ls >> name >> rows >> cols) || rows < 0 || cols < 0) {
        throw FormatError("bad param header: " + line);
      }
      Eigen::MatrixXd a(rows, cols);
      for (Eigen::Index r = 0; r < rows; ++r) {
        if (!std::getline(in, line)) throw FormatError("truncated param " + name);
        const char* p = line.c_str();
        for (Eigen::Index c = 0; c < cols; ++c) {
          char* endp = nullptr;
          a(r, c) = std::strtod(p, &endp);
          if (endp == p) throw FormatError("bad value in param " + name);
          p = endp;
        }
      }
      ck.arrays.emplace_back(name, std::move(a));
    } else {
      throw FormatError("unknown checkpoint line: " + line);
    }
  }
  if (!ended) throw FormatError("checkpoint missing end marker");
  return ck;
}

// Copies every array into the same-named parameter (shapes must agree).
template <typename Scalar>
void load_into(ParameterStore<Scalar>& store, const Checkpoint& ck) {
  if (ck.arrays.size() != store.size()) {
    throw FormatError("checkpoint has " + std::to_string(ck.arrays.size()) +
                      " arrays, model has " + std::to_string(store.size()));
  }
  for (const auto& [name, a] : ck.arrays) {
    auto* p = store.find(name);
    if (!p) throw FormatError("model has no parameter '" + name + "'");
    if (p->value.rows() != a.rows() || p->value.cols() != a.cols()) {
      throw FormatError("shape mismatch for '" + name + "'");
    }
    p->value = a.template cast<Scalar>();
    p->grad.setZero();
  }
  store.set_step(ck.step);
}

template <typename Scalar>
std::string checkpoint_string(const ParameterStore<Scalar>& store,
                              const std::map<std::string, std::string>& meta = {}) {
  std::ostringstream out;
  write_checkpoint(out, store, meta);
  return out.str();
}

inline std::uint64_t fnv1a(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline Checkpoint load_checkpoint_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open checkpoint " + path);
  return read_checkpoint(in);
}

}  // namespace f3::nn

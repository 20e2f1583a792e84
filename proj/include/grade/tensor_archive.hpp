#pragma once

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <nlohmann/json.hpp>

#include "grade/dense.hpp"

namespace grade {

class ArchiveError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Named dense tensors plus a JSON metadata block, stored as
///
///   "GRADETNS" u32 version  u64 meta_len  meta_json
///   u64 count  { u32 name_len  name  u8 scalar_bytes  u64 rows  u64 cols  data }*
///   "END!"
///
/// Data is column-major, little-endian IEEE-754 in the width it was written.
class TensorArchive {
 public:
  static constexpr std::uint32_t kVersion = 1;

  struct Tensor {
    std::uint8_t scalar_bytes = 8;
    std::uint64_t rows = 0;
    std::uint64_t cols = 0;
    std::vector<unsigned char> data;
  };

  nlohmann::json metadata = nlohmann::json::object();

  template <typename Derived>
  void put(const std::string& name, const Eigen::MatrixBase<Derived>& m) {
    using Scalar = typename Derived::Scalar;
    static_assert(std::is_same_v<Scalar, float> || std::is_same_v<Scalar, double>);
    MatrixX<Scalar> dense = m;
    Tensor t;
    t.scalar_bytes = sizeof(Scalar);
    t.rows = static_cast<std::uint64_t>(dense.rows());
    t.cols = static_cast<std::uint64_t>(dense.cols());
    t.data.resize(static_cast<std::size_t>(dense.size()) * sizeof(Scalar));
    if (!t.data.empty()) std::memcpy(t.data.data(), dense.data(), t.data.size());
    tensors_[name] = std::move(t);
  }

  bool contains(const std::string& name) const { return tensors_.contains(name); }
  const Tensor& at(const std::string& name) const;
  std::size_t size() const { return tensors_.size(); }
  const std::map<std::string, Tensor>& tensors() const { return tensors_; }

  /// Copies a tensor into `out`, which must already have the stored shape.
  template <typename Derived>
  void get_into(const std::string& name, Eigen::PlainObjectBase<Derived>& out) const {
    using Scalar = typename Derived::Scalar;
    const Tensor& t = at(name);
    if (static_cast<std::uint64_t>(out.rows()) != t.rows || static_cast<std::uint64_t>(out.cols()) != t.cols) {
      throw ArchiveError("tensor '" + name + "' has shape " + std::to_string(t.rows) + "x" + std::to_string(t.cols) +
                         ", expected " + std::to_string(out.rows()) + "x" + std::to_string(out.cols()));
    }
    out.derived() = read<Scalar>(t).reshaped(out.rows(), out.cols());
  }

  template <typename Scalar>
  MatrixX<Scalar> get(const std::string& name) const {
    return read<Scalar>(at(name));
  }

  void save(const std::filesystem::path& path) const;
  static TensorArchive load(const std::filesystem::path& path);

 private:
  template <typename Scalar>
  static MatrixX<Scalar> read(const Tensor& t) {
    const auto rows = static_cast<Eigen::Index>(t.rows);
    const auto cols = static_cast<Eigen::Index>(t.cols);
    if (t.scalar_bytes == sizeof(double)) {
      MatrixX<double> m(rows, cols);
      if (m.size()) std::memcpy(m.data(), t.data.data(), t.data.size());
      return m.template cast<Scalar>();
    }
    MatrixX<float> m(rows, cols);
    if (m.size()) std::memcpy(m.data(), t.data.data(), t.data.size());
    return m.template cast<Scalar>();
  }

  std::map<std::string, Tensor> tensors_;
};

}  // namespace grade

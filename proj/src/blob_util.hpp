#pragma once

#include <string>

#include "chatclf/classifiers.hpp"
#include "chatclf/error.hpp"

namespace chatclf::detail {

inline ParamBlob blob(std::string name, const Matrix& m) {
  ParamBlob b{std::move(name), static_cast<std::size_t>(m.rows()), static_cast<std::size_t>(m.cols()), {}};
  b.values.assign(m.data(), m.data() + m.size());
  return b;
}

inline ParamBlob blob(std::string name, const Vector& v) {
  ParamBlob b{std::move(name), static_cast<std::size_t>(v.size()), 1, {}};
  b.values.assign(v.data(), v.data() + v.size());
  return b;
}

inline ParamBlob blob(std::string name, double v) { return {std::move(name), 1, 1, {v}}; }

inline const ParamBlob& find_blob(const ParamBlobs& blobs, const std::string& name) {
  for (const auto& b : blobs) {
    if (b.name == name) return b;
  }
  throw ValidationError("model file lacks parameter blob '" + name + "'");
}

inline Matrix matrix_blob(const ParamBlobs& blobs, const std::string& name, std::size_t rows,
                          std::size_t cols) {
  const auto& b = find_blob(blobs, name);
  if (b.rows != rows || b.cols != cols || b.values.size() != rows * cols) {
    throw ValidationError("parameter blob '" + name + "' has wrong shape");
  }
  return Eigen::Map<const Matrix>(b.values.data(), static_cast<Eigen::Index>(rows),
                                  static_cast<Eigen::Index>(cols));
}

inline Vector vector_blob(const ParamBlobs& blobs, const std::string& name, std::size_t size) {
  const auto& b = find_blob(blobs, name);
  if (b.rows != size || b.cols != 1 || b.values.size() != size) {
    throw ValidationError("parameter blob '" + name + "' has wrong shape");
  }
  return Eigen::Map<const Vector>(b.values.data(), static_cast<Eigen::Index>(size));
}

inline double scalar_blob(const ParamBlobs& blobs, const std::string& name) {
  return vector_blob(blobs, name, 1)[0];
}

}  // namespace chatclf::detail

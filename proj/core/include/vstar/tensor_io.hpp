#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>

#include "vstar/tensor.hpp"

namespace vstar {

/// Container format: magic "VSTR", version byte 0x01, u32-LE header length,
/// UTF-8 JSON header {"dtype":"f32","shape":[...],"order":"row-major"},
/// then shape-product little-endian IEEE-754 f32 values.
class TensorIoError : public std::runtime_error {
public:
    enum class Kind {
        io,              // unreadable / unwritable path
        bad_magic,
        bad_version,
        bad_header,      // malformed JSON header or unsupported fields
        truncated,       // payload shorter than the shape demands
        shape_mismatch,  // payload longer than the shape demands
    };

    TensorIoError(Kind kind, const std::string& msg)
        : std::runtime_error(msg), kind_(kind) {}

    Kind kind() const { return kind_; }

private:
    Kind kind_;
};

/// Values are narrowed to f32 on disk; read(write(t)) reproduces the shape
/// exactly and values within f32 rounding.
void tensor_write(const Tensor& t, const std::filesystem::path& path);
Tensor tensor_read(const std::filesystem::path& path);

void matrix_write(const Matrix& m, const std::filesystem::path& path);
Matrix matrix_read(const std::filesystem::path& path);

}  // namespace vstar

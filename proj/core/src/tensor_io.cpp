#include "vstar/tensor_io.hpp"

#include <cstring>
#include <fstream>

#include <json.hpp>

namespace vstar {

namespace {

constexpr char MAGIC[4] = {'V', 'S', 'T', 'R'};
constexpr unsigned char VERSION = 0x01;

void put_u32_le(std::string& out, std::uint32_t v) {
    out.push_back(static_cast<char>(v & 0xFF));
    out.push_back(static_cast<char>((v >> 8) & 0xFF));
    out.push_back(static_cast<char>((v >> 16) & 0xFF));
    out.push_back(static_cast<char>((v >> 24) & 0xFF));
}

void put_f32_le(std::string& out, float f) {
    std::uint32_t bits;
    std::memcpy(&bits, &f, 4);
    put_u32_le(out, bits);
}

std::uint32_t get_u32_le(const unsigned char* p) {
    return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
           (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

}  // namespace

void tensor_write(const Tensor& t, const std::filesystem::path& path) {
    nlohmann::json header;
    header["dtype"] = "f32";
    header["shape"] = t.shape();
    header["order"] = "row-major";
    const std::string header_str = header.dump();

    std::string blob;
    blob.reserve(9 + header_str.size() + 4 * t.numel());
    blob.append(MAGIC, 4);
    blob.push_back(static_cast<char>(VERSION));
    put_u32_le(blob, static_cast<std::uint32_t>(header_str.size()));
    blob += header_str;
    for (std::size_t i = 0; i < t.numel(); ++i)
        put_f32_le(blob, static_cast<float>(t.data()[i]));

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw TensorIoError(TensorIoError::Kind::io, "cannot open for write: " + path.string());
    out.write(blob.data(), static_cast<std::streamsize>(blob.size()));
    if (!out) throw TensorIoError(TensorIoError::Kind::io, "write failed: " + path.string());
}

Tensor tensor_read(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw TensorIoError(TensorIoError::Kind::io, "cannot open for read: " + path.string());
    std::string blob((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

    if (blob.size() < 9) throw TensorIoError(TensorIoError::Kind::truncated, "file shorter than fixed header: " + path.string());
    if (std::memcmp(blob.data(), MAGIC, 4) != 0)
        throw TensorIoError(TensorIoError::Kind::bad_magic, "bad magic in " + path.string());
    if (static_cast<unsigned char>(blob[4]) != VERSION)
        throw TensorIoError(TensorIoError::Kind::bad_version, "unsupported container version in " + path.string());

    const std::uint32_t header_len = get_u32_le(reinterpret_cast<const unsigned char*>(blob.data() + 5));
    if (blob.size() < 9 + static_cast<std::size_t>(header_len))
        throw TensorIoError(TensorIoError::Kind::truncated, "truncated header in " + path.string());

    nlohmann::json header;
    try {
        header = nlohmann::json::parse(blob.substr(9, header_len));
    } catch (const nlohmann::json::exception& e) {
        throw TensorIoError(TensorIoError::Kind::bad_header, std::string("malformed header JSON: ") + e.what());
    }
    if (header.value("dtype", "") != "f32" || header.value("order", "") != "row-major" ||
        !header.contains("shape") || !header["shape"].is_array())
        throw TensorIoError(TensorIoError::Kind::bad_header, "unsupported header fields in " + path.string());

    std::vector<std::size_t> shape;
    for (const auto& d : header["shape"]) {
        if (!d.is_number_unsigned() || d.get<std::uint64_t>() == 0)
            throw TensorIoError(TensorIoError::Kind::bad_header, "non-positive dimension in header shape");
        shape.push_back(d.get<std::size_t>());
    }
    const std::size_t numel = Tensor::checked_numel(shape);

    const std::size_t payload = blob.size() - 9 - header_len;
    if (payload < numel * 4)
        throw TensorIoError(TensorIoError::Kind::truncated, "truncated payload in " + path.string());
    if (payload > numel * 4)
        throw TensorIoError(TensorIoError::Kind::shape_mismatch, "payload longer than shape product in " + path.string());

    Tensor t(shape);
    const unsigned char* p = reinterpret_cast<const unsigned char*>(blob.data()) + 9 + header_len;
    for (std::size_t i = 0; i < numel; ++i, p += 4) {
        std::uint32_t bits = get_u32_le(p);
        float f;
        std::memcpy(&f, &bits, 4);
        t.data()[i] = static_cast<double>(f);
    }
    return t;
}

void matrix_write(const Matrix& m, const std::filesystem::path& path) {
    Tensor t({m.rows(), m.cols()}, m.values());
    tensor_write(t, path);
}

Matrix matrix_read(const std::filesystem::path& path) {
    Tensor t = tensor_read(path);
    if (t.rank() != 2)
        throw TensorIoError(TensorIoError::Kind::bad_header, "expected rank-2 tensor in " + path.string());
    return Matrix(t.dim(0), t.dim(1), t.values());
}

}  // namespace vstar

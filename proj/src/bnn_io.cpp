#include <array>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

#include "gmpc/bnn.hpp"
#include "gmpc/error.hpp"

namespace gmpc::bnn {

using Eigen::MatrixXd;

// Layout: magic, u32 version, u32 hidden, u32 t_hist, u32 t_fut, f64 dropout,
// f64 meal_scale, f64 dose_scale, then per tensor u32 rows, u32 cols and
// row-major f64 values. Everything little-endian.

namespace {

void put_u32(std::ostream& out, std::uint32_t v) {
    std::array<char, 4> b;
    for (int i = 0; i < 4; ++i) b[static_cast<std::size_t>(i)] = static_cast<char>((v >> (8 * i)) & 0xffu);
    out.write(b.data(), 4);
}

void put_f64(std::ostream& out, double d) {
    const auto v = std::bit_cast<std::uint64_t>(d);
    std::array<char, 8> b;
    for (int i = 0; i < 8; ++i) b[static_cast<std::size_t>(i)] = static_cast<char>((v >> (8 * i)) & 0xffu);
    out.write(b.data(), 8);
}

std::uint32_t get_u32(std::istream& in) {
    std::array<unsigned char, 4> b{};
    if (!in.read(reinterpret_cast<char*>(b.data()), 4)) throw IoError("weight file truncated");
    std::uint32_t v = 0;
    for (int i = 3; i >= 0; --i) v = (v << 8) | b[static_cast<std::size_t>(i)];
    return v;
}

double get_f64(std::istream& in) {
    std::array<unsigned char, 8> b{};
    if (!in.read(reinterpret_cast<char*>(b.data()), 8)) throw IoError("weight file truncated");
    std::uint64_t v = 0;
    for (int i = 7; i >= 0; --i) v = (v << 8) | b[static_cast<std::size_t>(i)];
    return std::bit_cast<double>(v);
}

}  // namespace

void save_weights(const ModelWeights& w, std::ostream& out) {
    out.write(kWeightMagic, sizeof(kWeightMagic));
    put_u32(out, kWeightFormatVersion);
    put_u32(out, static_cast<std::uint32_t>(w.shape.hidden));
    put_u32(out, static_cast<std::uint32_t>(w.shape.t_hist));
    put_u32(out, static_cast<std::uint32_t>(w.shape.t_fut));
    put_f64(out, w.dropout);
    put_f64(out, w.norm.meal_scale);
    put_f64(out, w.norm.dose_scale);
    w.params.for_each([&](const Eigen::Ref<const MatrixXd>& t, const char*, bool) {
        put_u32(out, static_cast<std::uint32_t>(t.rows()));
        put_u32(out, static_cast<std::uint32_t>(t.cols()));
        for (Eigen::Index r = 0; r < t.rows(); ++r)
            for (Eigen::Index c = 0; c < t.cols(); ++c) put_f64(out, t(r, c));
    });
    if (!out) throw IoError("failed writing weight stream");
}

ModelWeights load_weights(std::istream& in) {
    char magic[sizeof(kWeightMagic)];
    if (!in.read(magic, sizeof(magic)) || std::memcmp(magic, kWeightMagic, sizeof(magic)) != 0)
        throw IoError("not a GMPC-BNN weight file");
    const std::uint32_t version = get_u32(in);
    if (version != kWeightFormatVersion)
        throw IoError("unsupported weight format version " + std::to_string(version));

    ModelShape shape;
    shape.hidden = static_cast<int>(get_u32(in));
    shape.t_hist = static_cast<int>(get_u32(in));
    shape.t_fut = static_cast<int>(get_u32(in));
    const double dropout = get_f64(in);
    Normalization norm;
    norm.meal_scale = get_f64(in);
    norm.dose_scale = get_f64(in);

    // Allocate tensors of the expected shapes, then fill and check dims.
    Rng dummy(0);
    ModelWeights w = init_weights(shape, dropout, norm, dummy);
    w.params.for_each([&](Eigen::Ref<MatrixXd> t, const char* name, bool) {
        const auto rows = get_u32(in);
        const auto cols = get_u32(in);
        if (rows != t.rows() || cols != t.cols())
            throw ShapeError(std::string("tensor ") + name + ": expected " + std::to_string(t.rows()) + "x" +
                             std::to_string(t.cols()) + ", got " + std::to_string(rows) + "x" + std::to_string(cols));
        for (Eigen::Index r = 0; r < t.rows(); ++r)
            for (Eigen::Index c = 0; c < t.cols(); ++c) {
                const double v = get_f64(in);
                if (!std::isfinite(v)) throw IoError(std::string("non-finite value in tensor ") + name);
                t(r, c) = v;
            }
    });
    return w;
}

void save_weights(const ModelWeights& w, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open " + path + " for writing");
    save_weights(w, out);
}

ModelWeights load_weights(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path);
    return load_weights(in);
}

}  // namespace gmpc::bnn

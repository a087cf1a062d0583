#include "ttconv/serialization.hpp"

#include <array>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

#include "ttconv/errors.hpp"

namespace ttconv {

namespace {

using Magic = std::array<char, 4>;
constexpr Magic kDenseMagic{'T', 'T', 'E', 'N'};
constexpr Magic kTTMagic{'T', 'T', 'T', 'N'};
constexpr Magic kMatrixMagic{'T', 'T', 'M', 'X'};
constexpr Magic kConvMagic{'T', 'T', 'C', 'V'};

// Sanity bound on any count read from a header before allocating.
constexpr std::uint64_t kMaxCount = kMaxDenseElements;

class Writer {
public:
    Writer(std::ostream& out, Dtype dtype) : out_(out), dtype_(dtype) {}

    void magic(const Magic& m) { out_.write(m.data(), 4); }
    void u32(std::uint32_t v) { raw(v, 4); }
    void u64(std::uint64_t v) { raw(v, 8); }
    void value(double v) {
        if (dtype_ == Dtype::F64) {
            std::uint64_t bits;
            std::memcpy(&bits, &v, 8);
            raw(bits, 8);
        } else {
            const auto f = static_cast<float>(v);
            std::uint32_t bits;
            std::memcpy(&bits, &f, 4);
            raw(bits, 4);
        }
    }
    void header(const Magic& m) {
        magic(m);
        u32(kFormatVersion);
        u32(static_cast<std::uint32_t>(dtype_));
    }
    void check() const {
        if (!out_) throw IoError("write failed");
    }

private:
    void raw(std::uint64_t v, int bytes) {
        char buf[8];
        for (int i = 0; i < bytes; ++i) buf[i] = static_cast<char>((v >> (8 * i)) & 0xff);
        out_.write(buf, bytes);
    }

    std::ostream& out_;
    Dtype dtype_;
};

class Reader {
public:
    explicit Reader(std::istream& in) : in_(in) {}

    void expect_magic(const Magic& m) {
        Magic got{};
        bytes(got.data(), 4);
        if (got != m) {
            throw ParseError("bad magic: expected " + std::string(m.data(), 4) + ", got " +
                             std::string(got.data(), 4));
        }
    }
    std::uint32_t u32() { return static_cast<std::uint32_t>(raw(4)); }
    std::uint64_t u64() { return raw(8); }
    std::uint64_t count(const char* what) {
        const std::uint64_t v = u64();
        if (v == 0 || v > kMaxCount) {
            throw ParseError(std::string("implausible ") + what + ": " + std::to_string(v));
        }
        return v;
    }
    Dtype header(const Magic& m) {
        expect_magic(m);
        const std::uint32_t version = u32();
        if (version != kFormatVersion) {
            throw ParseError("unsupported format version " + std::to_string(version));
        }
        const std::uint32_t code = u32();
        if (code > 1) throw ParseError("unknown dtype code " + std::to_string(code));
        dtype_ = static_cast<Dtype>(code);
        return dtype_;
    }
    std::uint32_t order() {
        const std::uint32_t d = u32();
        if (d == 0 || d > 64) throw ParseError("implausible tensor order " + std::to_string(d));
        return d;
    }
    double value() {
        if (dtype_ == Dtype::F64) {
            const std::uint64_t bits = raw(8);
            double v;
            std::memcpy(&v, &bits, 8);
            return v;
        }
        const auto bits = static_cast<std::uint32_t>(raw(4));
        float f;
        std::memcpy(&f, &bits, 4);
        return static_cast<double>(f);
    }

private:
    void bytes(char* dst, std::size_t n) {
        in_.read(dst, static_cast<std::streamsize>(n));
        if (static_cast<std::size_t>(in_.gcount()) != n) throw ParseError("unexpected end of file");
    }
    std::uint64_t raw(int n) {
        unsigned char buf[8];
        bytes(reinterpret_cast<char*>(buf), static_cast<std::size_t>(n));
        std::uint64_t v = 0;
        for (int i = n; i-- > 0;) v = (v << 8) | buf[i];
        return v;
    }

    std::istream& in_;
    Dtype dtype_ = Dtype::F64;
};

// Writes a core stored (row, slice, column) in slice-major order.
void write_core_slice_major(Writer& w, std::span<const double> core, std::size_t r0,
                            std::size_t n, std::size_t r1) {
    for (std::size_t j = 0; j < n; ++j) {
        for (std::size_t a = 0; a < r0; ++a) {
            for (std::size_t b = 0; b < r1; ++b) w.value(core[(a * n + j) * r1 + b]);
        }
    }
}

std::vector<double> read_core_slice_major(Reader& r, std::size_t r0, std::size_t n,
                                          std::size_t r1) {
    if (r0 * n * r1 > kMaxCount) throw ParseError("core too large");
    std::vector<double> core(r0 * n * r1);
    for (std::size_t j = 0; j < n; ++j) {
        for (std::size_t a = 0; a < r0; ++a) {
            for (std::size_t b = 0; b < r1; ++b) core[(a * n + j) * r1 + b] = r.value();
        }
    }
    return core;
}

void write_cores(Writer& w, const TTTensor& tt) {
    for (std::size_t k = 0; k < tt.order(); ++k) {
        write_core_slice_major(w, tt.core(k), tt.rank(k), tt.mode_size(k), tt.rank(k + 1));
    }
}

std::vector<std::vector<double>> read_cores(Reader& r, const Shape& modes, const Ranks& ranks) {
    std::vector<std::vector<double>> cores;
    for (std::size_t k = 0; k < modes.size(); ++k) {
        cores.push_back(read_core_slice_major(r, ranks[k], modes[k], ranks[k + 1]));
    }
    return cores;
}

template <typename F>
auto rethrow_shape(F&& f) {
    try {
        return f();
    } catch (const ShapeError& e) {
        throw ParseError(std::string("inconsistent file contents: ") + e.what());
    }
}

}  // namespace

void write_dense(std::ostream& out, const DenseTensor& t, Dtype dtype) {
    Writer w(out, dtype);
    w.header(kDenseMagic);
    w.u32(static_cast<std::uint32_t>(t.order()));
    for (std::size_t s : t.shape()) w.u64(s);
    for (double v : t.data()) w.value(v);
    w.check();
}

Stored<DenseTensor> read_dense(std::istream& in) {
    Reader r(in);
    const Dtype dtype = r.header(kDenseMagic);
    const std::uint32_t d = r.order();
    Shape shape(d);
    for (auto& s : shape) s = r.count("dimension");
    const std::size_t n = shape_product(shape);
    if (n > kMaxCount) throw ParseError("tensor too large");
    std::vector<double> data(n);
    for (double& v : data) v = r.value();
    return {rethrow_shape([&] { return DenseTensor(std::move(shape), std::move(data)); }), dtype};
}

void write_tt(std::ostream& out, const TTTensor& tt, Dtype dtype) {
    Writer w(out, dtype);
    w.header(kTTMagic);
    w.u32(static_cast<std::uint32_t>(tt.order()));
    for (std::size_t n : tt.mode_sizes()) w.u64(n);
    for (std::size_t r : tt.ranks()) w.u64(r);
    write_cores(w, tt);
    w.check();
}

Stored<TTTensor> read_tt(std::istream& in) {
    Reader r(in);
    const Dtype dtype = r.header(kTTMagic);
    const std::uint32_t d = r.order();
    Shape modes(d);
    for (auto& n : modes) n = r.count("mode size");
    Ranks ranks(d + 1);
    for (auto& k : ranks) k = r.count("rank");
    auto cores = read_cores(r, modes, ranks);
    return {rethrow_shape([&] {
                return TTTensor(std::move(modes), std::move(ranks), std::move(cores));
            }),
            dtype};
}

void write_ttmatrix(std::ostream& out, const TTMatrix& m, Dtype dtype) {
    Writer w(out, dtype);
    w.header(kMatrixMagic);
    w.u32(static_cast<std::uint32_t>(m.row_factors().size()));
    for (std::size_t f : m.row_factors()) w.u64(f);
    for (std::size_t f : m.col_factors()) w.u64(f);
    w.check();
    write_tt(out, m.tt(), dtype);
}

Stored<TTMatrix> read_ttmatrix(std::istream& in) {
    Reader r(in);
    const Dtype dtype = r.header(kMatrixMagic);
    const std::uint32_t d = r.order();
    Factors rows(d), cols(d);
    for (auto& f : rows) f = r.count("row factor");
    for (auto& f : cols) f = r.count("column factor");
    Stored<TTTensor> tt = read_tt(in);
    if (tt.dtype != dtype) throw ParseError("embedded TT dtype differs from TTMX header");
    return {rethrow_shape([&] {
                return TTMatrix(std::move(rows), std::move(cols), std::move(tt.value));
            }),
            dtype};
}

void write_ttconv(std::ostream& out, const TTConvKernel& k, Dtype dtype) {
    Writer w(out, dtype);
    const auto& fact = k.factorization();
    w.header(kConvMagic);
    w.u32(static_cast<std::uint32_t>(k.filter()));
    w.u32(static_cast<std::uint32_t>(fact.levels()));
    for (std::size_t f : fact.c_factors) w.u64(f);
    for (std::size_t f : fact.s_factors) w.u64(f);
    w.u32(static_cast<std::uint32_t>(fact.pad_c));
    w.u32(static_cast<std::uint32_t>(fact.pad_s));
    for (std::size_t r : k.tt().ranks()) w.u64(r);
    write_cores(w, k.tt());
    w.check();
}

Stored<TTConvKernel> read_ttconv(std::istream& in) {
    Reader r(in);
    const Dtype dtype = r.header(kConvMagic);
    const std::uint32_t filter = r.u32();
    if (filter == 0 || filter > 4096) throw ParseError("implausible filter size");
    const std::uint32_t d = r.order();
    ChannelFactorization fact;
    fact.c_factors.resize(d);
    fact.s_factors.resize(d);
    for (auto& f : fact.c_factors) f = r.count("C factor");
    for (auto& f : fact.s_factors) f = r.count("S factor");
    fact.pad_c = r.u32();
    fact.pad_s = r.u32();
    Ranks ranks(d + 2);
    for (auto& k : ranks) k = r.count("rank");
    Shape modes{std::size_t{filter} * filter};
    for (std::uint32_t k = 0; k < d; ++k) modes.push_back(fact.c_factors[k] * fact.s_factors[k]);
    auto cores = read_cores(r, modes, ranks);
    return {rethrow_shape([&] {
                return TTConvKernel(filter, std::move(fact),
                                    TTTensor(std::move(modes), std::move(ranks), std::move(cores)));
            }),
            dtype};
}

FileKind detect_file_kind(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    Magic m{};
    in.read(m.data(), 4);
    if (in.gcount() != 4) throw ParseError(path.string() + ": file too short");
    if (m == kDenseMagic) return FileKind::Dense;
    if (m == kTTMagic) return FileKind::TT;
    if (m == kMatrixMagic) return FileKind::TTMatrix;
    if (m == kConvMagic) return FileKind::TTConv;
    throw ParseError(path.string() + ": unknown magic");
}

namespace {

std::ofstream open_out(const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    return out;
}

std::ifstream open_in(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    return in;
}

}  // namespace

void save_dense(const std::filesystem::path& path, const DenseTensor& t, Dtype dtype) {
    auto out = open_out(path);
    write_dense(out, t, dtype);
}
void save_tt(const std::filesystem::path& path, const TTTensor& tt, Dtype dtype) {
    auto out = open_out(path);
    write_tt(out, tt, dtype);
}
void save_ttmatrix(const std::filesystem::path& path, const TTMatrix& m, Dtype dtype) {
    auto out = open_out(path);
    write_ttmatrix(out, m, dtype);
}
void save_ttconv(const std::filesystem::path& path, const TTConvKernel& k, Dtype dtype) {
    auto out = open_out(path);
    write_ttconv(out, k, dtype);
}
Stored<DenseTensor> load_dense(const std::filesystem::path& path) {
    auto in = open_in(path);
    return read_dense(in);
}
Stored<TTTensor> load_tt(const std::filesystem::path& path) {
    auto in = open_in(path);
    return read_tt(in);
}
Stored<TTMatrix> load_ttmatrix(const std::filesystem::path& path) {
    auto in = open_in(path);
    return read_ttmatrix(in);
}
Stored<TTConvKernel> load_ttconv(const std::filesystem::path& path) {
    auto in = open_in(path);
    return read_ttconv(in);
}

}  // namespace ttconv

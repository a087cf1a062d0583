#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>

#include "ttconv/dense_tensor.hpp"
#include "ttconv/tt_conv.hpp"
#include "ttconv/tt_matrix.hpp"
#include "ttconv/tt_tensor.hpp"

namespace ttconv {

// Binary formats, all little-endian:
//   .ten  "TTEN" u32 version, u32 dtype, u32 d, d x u64 dims, values (last index fastest)
//   .tt   "TTTN" u32 version, u32 dtype, u32 d, d x u64 modes, (d+1) x u64 ranks,
//         cores in order, each slice-major (slice, row, column)
//   TTMX  "TTMX" u32 version, u32 dtype, u32 d, d x u64 row factors,
//         d x u64 col factors, then a complete .tt record
//   TTCV  "TTCV" u32 version, u32 dtype, u32 l, u32 d, d x u64 C factors,
//         d x u64 S factors, u32 pad_c, u32 pad_s, (d+2) x u64 ranks,
//         G0 then the channel cores, each slice-major
enum class Dtype : std::uint32_t { F64 = 0, F32 = 1 };

inline constexpr std::uint32_t kFormatVersion = 1;

enum class FileKind { Dense, TT, TTMatrix, TTConv };

template <typename T>
struct Stored {
    T value;
    Dtype dtype = Dtype::F64;
};

void write_dense(std::ostream& out, const DenseTensor& t, Dtype dtype = Dtype::F64);
void write_tt(std::ostream& out, const TTTensor& tt, Dtype dtype = Dtype::F64);
void write_ttmatrix(std::ostream& out, const TTMatrix& m, Dtype dtype = Dtype::F64);
void write_ttconv(std::ostream& out, const TTConvKernel& k, Dtype dtype = Dtype::F64);

// Throw ParseError on malformed input.
Stored<DenseTensor> read_dense(std::istream& in);
Stored<TTTensor> read_tt(std::istream& in);
Stored<TTMatrix> read_ttmatrix(std::istream& in);
Stored<TTConvKernel> read_ttconv(std::istream& in);

// Identifies a file by its magic; ParseError if unknown, IoError if unreadable.
FileKind detect_file_kind(const std::filesystem::path& path);

// Path-based wrappers; IoError when the file cannot be opened or written.
void save_dense(const std::filesystem::path& path, const DenseTensor& t, Dtype dtype = Dtype::F64);
void save_tt(const std::filesystem::path& path, const TTTensor& tt, Dtype dtype = Dtype::F64);
void save_ttmatrix(const std::filesystem::path& path, const TTMatrix& m, Dtype dtype = Dtype::F64);
void save_ttconv(const std::filesystem::path& path, const TTConvKernel& k, Dtype dtype = Dtype::F64);
Stored<DenseTensor> load_dense(const std::filesystem::path& path);
Stored<TTTensor> load_tt(const std::filesystem::path& path);
Stored<TTMatrix> load_ttmatrix(const std::filesystem::path& path);
Stored<TTConvKernel> load_ttconv(const std::filesystem::path& path);

}  // namespace ttconv

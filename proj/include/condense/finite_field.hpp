#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "condense/rng.hpp"

namespace condense::ff {

// A field symbol. Meaningful only together with the GaloisField it came from.
using Symbol = std::uint16_t;

// GF(2^m), 1 <= m <= 16, defined by an irreducible reduction polynomial
// given as a bitmask including the x^m term (0x11B is x^8+x^4+x^3+x+1).
//
// Small fields (m <= 8) multiply through log/antilog tables built from a
// primitive element found at construction; larger fields use carry-less
// shift-and-reduce. Copies share the immutable tables.
class GaloisField {
 public:
  static constexpr std::uint32_t kDefaultPolynomial = 0x11B;

  // Throws Error(InvalidField) when m is out of range or the polynomial is
  // not an irreducible degree-m polynomial.
  GaloisField(unsigned m, std::uint32_t polynomial);

  static GaloisField gf2() { return GaloisField(1, 0b11); }
  static GaloisField gf256() { return GaloisField(8, kDefaultPolynomial); }

  // Lowest-weight irreducible polynomial of degree m (used when a scenario
  // names only the field order).
  static std::uint32_t default_polynomial(unsigned m);

  unsigned degree() const noexcept { return m_; }
  std::uint32_t polynomial() const noexcept { return poly_; }
  std::uint32_t order() const noexcept { return 1u << m_; }
  bool contains(std::uint32_t value) const noexcept { return value < order(); }

  static Symbol add(Symbol a, Symbol b) noexcept { return static_cast<Symbol>(a ^ b); }
  static Symbol sub(Symbol a, Symbol b) noexcept { return static_cast<Symbol>(a ^ b); }
  Symbol mul(Symbol a, Symbol b) const noexcept;
  // Throws Error(ZeroInverse) for a == 0.
  Symbol inv(Symbol a) const;
  Symbol div(Symbol a, Symbol b) const { return mul(a, inv(b)); }
  Symbol pow(Symbol a, std::uint64_t e) const noexcept;

  // dst[i] += c * src[i]
  void axpy(Symbol c, std::span<const Symbol> src, std::span<Symbol> dst) const;

  Symbol random(RngStream& rng) const noexcept {
    return static_cast<Symbol>(rng() & (order() - 1));
  }

  friend bool operator==(const GaloisField& a, const GaloisField& b) noexcept {
    return a.m_ == b.m_ && a.poly_ == b.poly_;
  }

 private:
  struct Tables {
    std::vector<Symbol> exp;  // 2*(q-1) entries so log sums need no modulo
    std::vector<std::uint32_t> log;
  };

  Symbol clmul_reduce(Symbol a, Symbol b) const noexcept;

  unsigned m_;
  std::uint32_t poly_;
  std::shared_ptr<const Tables> tables_;
};

// Reference product with no tables; the multiplication oracle for tests and
// the slow path for m > 8.
Symbol carryless_multiply(Symbol a, Symbol b, unsigned m, std::uint32_t polynomial) noexcept;

bool is_irreducible(unsigned m, std::uint32_t polynomial) noexcept;

class FieldMatrix {
 public:
  FieldMatrix() = default;
  FieldMatrix(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols), data_(rows * cols) {}
  // Throws Error(DimensionMismatch) unless entries.size() == rows * cols.
  FieldMatrix(std::size_t rows, std::size_t cols, std::vector<Symbol> entries);

  static FieldMatrix identity(std::size_t n);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }

  Symbol& operator()(std::size_t r, std::size_t c) noexcept { return data_[r * cols_ + c]; }
  Symbol operator()(std::size_t r, std::size_t c) const noexcept { return data_[r * cols_ + c]; }

  std::span<Symbol> row(std::size_t r) noexcept { return {data_.data() + r * cols_, cols_}; }
  std::span<const Symbol> row(std::size_t r) const noexcept { return {data_.data() + r * cols_, cols_}; }

  const std::vector<Symbol>& entries() const noexcept { return data_; }

  friend bool operator==(const FieldMatrix&, const FieldMatrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<Symbol> data_;
};

FieldMatrix multiply(const GaloisField& field, const FieldMatrix& a, const FieldMatrix& b);

enum class SolveStatus { Solved, RankDeficient };

struct SolveResult {
  SolveStatus status = SolveStatus::RankDeficient;
  std::size_t rank = 0;
  // Present iff status == Solved: the unique N x L solution of A X = B.
  std::optional<FieldMatrix> solution;
};

// Gauss-Jordan elimination of A (N' x N) against B (N' x L). Pivots are the
// first nonzero entry in row order within each column, so traces are
// reproducible. Throws Error(DimensionMismatch) when row counts differ.
SolveResult gaussian_solve(const GaloisField& field, const FieldMatrix& a, const FieldMatrix& b);

std::size_t rank(const GaloisField& field, const FieldMatrix& a);

}  // namespace condense::ff

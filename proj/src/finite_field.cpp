#include "condense/finite_field.hpp"

#include <algorithm>
#include <bit>
#include <string>
#include <utility>

#include "condense/error.hpp"

namespace condense::ff {

namespace {

unsigned poly_degree(std::uint32_t p) noexcept { return p == 0 ? 0 : std::bit_width(p) - 1; }

// Remainder of polynomial division over GF(2).
std::uint32_t poly_mod(std::uint32_t a, std::uint32_t b) noexcept {
  const unsigned db = poly_degree(b);
  while (a != 0 && poly_degree(a) >= db) a ^= b << (poly_degree(a) - db);
  return a;
}

}  // namespace

Symbol carryless_multiply(Symbol a, Symbol b, unsigned m, std::uint32_t polynomial) noexcept {
  std::uint32_t x = a;
  std::uint32_t y = b;
  std::uint32_t product = 0;
  const std::uint32_t top = 1u << m;
  while (y != 0) {
    if (y & 1u) product ^= x;
    y >>= 1;
    x <<= 1;
    if (x & top) x ^= polynomial;
  }
  return static_cast<Symbol>(product);
}

bool is_irreducible(unsigned m, std::uint32_t polynomial) noexcept {
  if (m < 1 || m > 16 || poly_degree(polynomial) != m) return false;
  if (m == 1) return true;
  // Trial division by every polynomial of degree 1..m/2.
  for (std::uint32_t d = 2; poly_degree(d) <= m / 2; ++d) {
    if (poly_mod(polynomial, d) == 0) return false;
  }
  return true;
}

std::uint32_t GaloisField::default_polynomial(unsigned m) {
  if (m == 8) return kDefaultPolynomial;
  if (m < 1 || m > 16) throw Error(ErrorCode::InvalidField, "extension degree must be in [1, 16]");
  const std::uint32_t top = 1u << m;
  for (std::uint32_t low = 1; low < top; low += 2) {
    if (is_irreducible(m, top | low)) return top | low;
  }
  throw Error(ErrorCode::InvalidField, "no irreducible polynomial found");  // unreachable
}

GaloisField::GaloisField(unsigned m, std::uint32_t polynomial) : m_(m), poly_(polynomial) {
  if (m < 1 || m > 16) {
    throw Error(ErrorCode::InvalidField, "extension degree " + std::to_string(m) + " outside [1, 16]");
  }
  if (!is_irreducible(m, polynomial)) {
    throw Error(ErrorCode::InvalidField,
                "polynomial " + std::to_string(polynomial) + " is not irreducible of degree " + std::to_string(m));
  }
  if (m > 8) return;

  const std::uint32_t q = order();
  auto tables = std::make_shared<Tables>();
  tables->exp.resize(2 * (q - 1) + 1);
  tables->log.assign(q, 0);
  if (q == 2) {
    tables->exp = {1, 1, 1};
    tables_ = std::move(tables);
    return;
  }
  // 0x11B has no primitive x, so search for the smallest generator.
  for (std::uint32_t g = 2; g < q; ++g) {
    Symbol v = 1;
    std::uint32_t period = 0;
    do {
      v = carryless_multiply(v, static_cast<Symbol>(g), m, polynomial);
      ++period;
    } while (v != 1);
    if (period != q - 1) continue;
    v = 1;
    for (std::uint32_t i = 0; i < q - 1; ++i) {
      tables->exp[i] = v;
      tables->exp[i + q - 1] = v;
      tables->log[v] = i;
      v = carryless_multiply(v, static_cast<Symbol>(g), m, polynomial);
    }
    tables->exp[2 * (q - 1)] = 1;
    tables_ = std::move(tables);
    return;
  }
  throw Error(ErrorCode::InvalidField, "no primitive element");  // unreachable for irreducible polys
}

Symbol GaloisField::clmul_reduce(Symbol a, Symbol b) const noexcept {
  return carryless_multiply(a, b, m_, poly_);
}

Symbol GaloisField::mul(Symbol a, Symbol b) const noexcept {
  if (a == 0 || b == 0) return 0;
  if (tables_) return tables_->exp[tables_->log[a] + tables_->log[b]];
  return clmul_reduce(a, b);
}

Symbol GaloisField::inv(Symbol a) const {
  if (a == 0) throw Error(ErrorCode::ZeroInverse, "zero has no multiplicative inverse");
  if (tables_) {
    const std::uint32_t q1 = order() - 1;
    return tables_->exp[(q1 - tables_->log[a]) % q1];
  }
  // a^(q-2) by Fermat.
  return pow(a, order() - 2);
}

Symbol GaloisField::pow(Symbol a, std::uint64_t e) const noexcept {
  Symbol result = 1;
  Symbol base = a;
  while (e != 0) {
    if (e & 1u) result = mul(result, base);
    base = mul(base, base);
    e >>= 1;
  }
  return result;
}

void GaloisField::axpy(Symbol c, std::span<const Symbol> src, std::span<Symbol> dst) const {
  if (src.size() != dst.size()) throw Error(ErrorCode::DimensionMismatch, "axpy length mismatch");
  if (c == 0) return;
  if (c == 1) {
    for (std::size_t i = 0; i < src.size(); ++i) dst[i] ^= src[i];
    return;
  }
  if (tables_) {
    const std::uint32_t lc = tables_->log[c];
    for (std::size_t i = 0; i < src.size(); ++i) {
      if (src[i] != 0) dst[i] ^= tables_->exp[lc + tables_->log[src[i]]];
    }
    return;
  }
  for (std::size_t i = 0; i < src.size(); ++i) dst[i] ^= clmul_reduce(c, src[i]);
}

FieldMatrix::FieldMatrix(std::size_t rows, std::size_t cols, std::vector<Symbol> entries)
    : rows_(rows), cols_(cols), data_(std::move(entries)) {
  if (data_.size() != rows * cols) {
    throw Error(ErrorCode::DimensionMismatch, "matrix entries do not match rows*cols");
  }
}

FieldMatrix FieldMatrix::identity(std::size_t n) {
  FieldMatrix id(n, n);
  for (std::size_t i = 0; i < n; ++i) id(i, i) = 1;
  return id;
}

FieldMatrix multiply(const GaloisField& field, const FieldMatrix& a, const FieldMatrix& b) {
  if (a.cols() != b.rows()) throw Error(ErrorCode::DimensionMismatch, "inner dimensions differ");
  FieldMatrix out(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t k = 0; k < a.cols(); ++k) field.axpy(a(i, k), b.row(k), out.row(i));
  }
  return out;
}

SolveResult gaussian_solve(const GaloisField& field, const FieldMatrix& a, const FieldMatrix& b) {
  if (a.rows() != b.rows()) throw Error(ErrorCode::DimensionMismatch, "A and B row counts differ");
  FieldMatrix lhs = a;
  FieldMatrix rhs = b;
  const std::size_t rows = lhs.rows();
  const std::size_t unknowns = lhs.cols();

  std::size_t pivot_row = 0;
  for (std::size_t col = 0; col < unknowns && pivot_row < rows; ++col) {
    std::size_t found = rows;
    for (std::size_t r = pivot_row; r < rows; ++r) {
      if (lhs(r, col) != 0) {
        found = r;
        break;
      }
    }
    if (found == rows) continue;
    if (found != pivot_row) {
      std::swap_ranges(lhs.row(found).begin(), lhs.row(found).end(), lhs.row(pivot_row).begin());
      std::swap_ranges(rhs.row(found).begin(), rhs.row(found).end(), rhs.row(pivot_row).begin());
    }
    const Symbol scale = field.inv(lhs(pivot_row, col));
    for (auto& v : lhs.row(pivot_row)) v = field.mul(v, scale);
    for (auto& v : rhs.row(pivot_row)) v = field.mul(v, scale);
    for (std::size_t r = 0; r < rows; ++r) {
      if (r == pivot_row) continue;
      const Symbol factor = lhs(r, col);
      if (factor == 0) continue;
      field.axpy(factor, lhs.row(pivot_row), lhs.row(r));
      field.axpy(factor, rhs.row(pivot_row), rhs.row(r));
    }
    ++pivot_row;
  }

  SolveResult result;
  result.rank = pivot_row;
  if (pivot_row < unknowns) return result;

  // Full column rank: pivots sit on the diagonal of the first N rows.
  FieldMatrix x(unknowns, rhs.cols());
  for (std::size_t i = 0; i < unknowns; ++i) {
    std::copy(rhs.row(i).begin(), rhs.row(i).end(), x.row(i).begin());
  }
  result.status = SolveStatus::Solved;
  result.solution = std::move(x);
  return result;
}

std::size_t rank(const GaloisField& field, const FieldMatrix& a) {
  return gaussian_solve(field, a, FieldMatrix(a.rows(), 0)).rank;
}

}  // namespace condense::ff

#pragma once

// Fixed-width decimal cells in ten's complement.
//
// A cell of width D holds a value in [0, 10^D). Values at or above 10^D/2
// stand for the negative number value - 10^D, so the representable signed
// range is [-10^D/2, 10^D/2). All four mill operations reduce mod 10^D and
// report, through a flag, whether the true signed result left that range.

#include <algorithm>
#include <array>
#include <cstdint>
#include <string>
#include <string_view>

#include "ae/error.hpp"
#include "ae/text.hpp"

namespace ae {

inline constexpr int kDefaultWidth = 30;
inline constexpr int kMaxWidth = 64;

class Cell {
 public:
  Cell() : Cell(kDefaultWidth) {}

  explicit Cell(int width) : width_(width) {
    if (width < 1 || width > kMaxWidth)
      throw RangeError("cell width " + std::to_string(width) + " outside 1.." +
                       std::to_string(kMaxWidth));
  }

  static Cell from_int(std::int64_t v, int width) {
    Cell c(width);
    const bool negative = v < 0;
    // Magnitude as unsigned so INT64_MIN is handled.
    std::uint64_t mag = negative ? ~static_cast<std::uint64_t>(v) + 1 : static_cast<std::uint64_t>(v);
    int i = 0;
    while (mag != 0) {
      if (i == width) throw RangeError(std::to_string(v) + " does not fit in " + std::to_string(width) + " digits");
      c.d_[i++] = static_cast<std::uint8_t>(mag % 10);
      mag /= 10;
    }
    c.finish_signed(negative, std::to_string(v));
    return c;
  }

  // Signed decimal literal such as "-7" or "+42".
  static Cell parse(std::string_view literal, int width) {
    Cell c(width);
    std::string_view s = text::trim(literal);
    bool negative = false;
    if (!s.empty() && (s.front() == '-' || s.front() == '+')) {
      negative = s.front() == '-';
      s.remove_prefix(1);
    }
    if (s.empty() || !std::all_of(s.begin(), s.end(), [](char ch) { return ch >= '0' && ch <= '9'; }))
      throw RangeError("malformed cell literal '" + std::string(literal) + "'");
    while (s.size() > 1 && s.front() == '0') s.remove_prefix(1);
    if (s.size() > static_cast<std::size_t>(width))
      throw RangeError("'" + std::string(literal) + "' does not fit in " + std::to_string(width) + " digits");
    for (std::size_t i = 0; i < s.size(); ++i) c.d_[i] = static_cast<std::uint8_t>(s[s.size() - 1 - i] - '0');
    c.finish_signed(negative, std::string(literal));
    return c;
  }

  // Raw digit string, most significant first; the width is its length.
  static Cell from_digits(std::string_view digits) {
    Cell c(static_cast<int>(digits.size()));
    for (std::size_t i = 0; i < digits.size(); ++i) {
      char ch = digits[digits.size() - 1 - i];
      if (ch < '0' || ch > '9') throw RangeError("non-digit in cell image '" + std::string(digits) + "'");
      c.d_[i] = static_cast<std::uint8_t>(ch - '0');
    }
    return c;
  }

  static Cell zero(int width) { return Cell(width); }

  int width() const noexcept { return width_; }

  // Digit by power of ten (0 = units).
  int digit(int power) const { return d_.at(static_cast<std::size_t>(power)); }

  std::string digits() const {
    std::string s(static_cast<std::size_t>(width_), '0');
    for (int i = 0; i < width_; ++i) s[static_cast<std::size_t>(width_ - 1 - i)] = static_cast<char>('0' + d_[i]);
    return s;
  }

  bool is_zero() const noexcept {
    return std::all_of(d_.begin(), d_.begin() + width_, [](std::uint8_t x) { return x == 0; });
  }

  bool is_negative() const noexcept { return d_[width_ - 1] >= 5; }

  // Ten's complement: (10^D - x) mod 10^D.
  Cell complement() const {
    Cell out(width_);
    int borrow = 0;
    for (int i = 0; i < width_; ++i) {
      int v = -d_[i] - borrow;
      borrow = v < 0 ? 1 : 0;
      out.d_[i] = static_cast<std::uint8_t>(v + 10 * borrow);
    }
    return out;
  }

  std::string to_string() const {
    const Cell mag = is_negative() ? complement() : *this;
    std::string s = mag.digits();
    auto first = s.find_first_not_of('0');
    s = first == std::string::npos ? "0" : s.substr(first);
    return is_negative() ? "-" + s : s;
  }

  std::int64_t to_int() const {
    auto v = text::parse_int<std::int64_t>(to_string());
    if (!v) throw RangeError("cell value " + to_string() + " does not fit a 64-bit integer");
    return *v;
  }

  friend bool operator==(const Cell& a, const Cell& b) noexcept {
    return a.width_ == b.width_ && std::equal(a.d_.begin(), a.d_.begin() + a.width_, b.d_.begin());
  }

 private:
  friend struct CellOps;

  // On entry d_ holds a magnitude; checks the signed range and applies the sign.
  void finish_signed(bool negative, const std::string& shown) {
    // Range is [-H, H) with H = 5 * 10^(D-1): a magnitude is too big when its
    // top digit exceeds 5, or equals 5 with any lower digit set (or at all, if
    // the value is positive).
    const int top = d_[width_ - 1];
    const bool lower_nonzero =
        std::any_of(d_.begin(), d_.begin() + width_ - 1, [](std::uint8_t x) { return x != 0; });
    const bool too_big = top > 5 || (top == 5 && (lower_nonzero || !negative));
    if (too_big) throw RangeError(shown + " outside the signed range of " + std::to_string(width_) + " digits");
    if (negative) *this = complement();
  }

  std::array<std::uint8_t, kMaxWidth> d_{};  // least significant first
  int width_;
};

struct ArithResult {
  Cell value;
  bool overflow = false;
};

struct CellOps {
  static void require_same_width(const Cell& a, const Cell& b) {
    if (a.width_ != b.width_)
      throw RangeError("width mismatch: " + std::to_string(a.width_) + " vs " + std::to_string(b.width_));
  }

  static Cell add_mod(const Cell& a, const Cell& b) {
    Cell out(a.width_);
    int carry = 0;
    for (int i = 0; i < a.width_; ++i) {
      int v = a.d_[i] + b.d_[i] + carry;
      carry = v / 10;
      out.d_[i] = static_cast<std::uint8_t>(v % 10);
    }
    return out;
  }

  static Cell magnitude(const Cell& c) { return c.is_negative() ? c.complement() : c; }

  static ArithResult mul(const Cell& a, const Cell& b) {
    require_same_width(a, b);
    const int w = a.width_;
    const Cell ma = magnitude(a), mb = magnitude(b);
    std::array<int, 2 * kMaxWidth + 1> prod{};
    for (int i = 0; i < w; ++i) {
      if (ma.d_[i] == 0) continue;
      for (int j = 0; j < w; ++j) prod[i + j] += ma.d_[i] * mb.d_[j];
    }
    for (int k = 0; k < 2 * w; ++k) {
      prod[k + 1] += prod[k] / 10;
      prod[k] %= 10;
    }
    Cell low(w);
    for (int i = 0; i < w; ++i) low.d_[i] = static_cast<std::uint8_t>(prod[i]);
    const bool high_nonzero = std::any_of(prod.begin() + w, prod.begin() + 2 * w + 1, [](int x) { return x != 0; });
    const bool negative = (a.is_negative() != b.is_negative()) && !(low.is_zero() && !high_nonzero);
    bool overflow = high_nonzero;
    if (!overflow) {
      // low is the exact magnitude here; compare against H.
      const int top = low.d_[w - 1];
      const bool lower_nonzero =
          std::any_of(low.d_.begin(), low.d_.begin() + w - 1, [](std::uint8_t x) { return x != 0; });
      overflow = top > 5 || (top == 5 && (lower_nonzero || !negative));
    }
    return {negative ? low.complement() : low, overflow};
  }

  // Magnitude compare on the first w digits.
  static int compare_mag(const std::array<std::uint8_t, kMaxWidth + 1>& x, const Cell& y, int w) {
    if (x[w] != 0) return 1;
    for (int i = w - 1; i >= 0; --i)
      if (x[i] != y.d_[i]) return x[i] < y.d_[i] ? -1 : 1;
    return 0;
  }

  static ArithResult div(const Cell& a, const Cell& b) {
    require_same_width(a, b);
    if (b.is_zero()) throw DivisionByZero();
    const int w = a.width_;
    const Cell ma = magnitude(a), mb = magnitude(b);
    Cell q(w);
    std::array<std::uint8_t, kMaxWidth + 1> rem{};
    for (int i = w - 1; i >= 0; --i) {
      // rem = rem * 10 + ma.d_[i]
      for (int k = w; k > 0; --k) rem[k] = rem[k - 1];
      rem[0] = ma.d_[i];
      int qd = 0;
      while (compare_mag(rem, mb, w) >= 0) {
        int borrow = 0;
        for (int k = 0; k <= w; ++k) {
          int v = rem[k] - (k < w ? mb.d_[k] : 0) - borrow;
          borrow = v < 0 ? 1 : 0;
          rem[k] = static_cast<std::uint8_t>(v + 10 * borrow);
        }
        ++qd;
      }
      q.d_[i] = static_cast<std::uint8_t>(qd);
    }
    const bool negative = (a.is_negative() != b.is_negative()) && !q.is_zero();
    // Only -H / -1 = +H escapes the range.
    const bool overflow = !negative && q.is_negative();
    return {negative ? q.complement() : q, overflow};
  }
};

inline Cell cell_from_int(std::int64_t v, int width) { return Cell::from_int(v, width); }
inline std::int64_t cell_to_int(const Cell& c) { return c.to_int(); }
inline bool is_zero(const Cell& c) noexcept { return c.is_zero(); }
inline Cell complement(const Cell& c) { return c.complement(); }

inline ArithResult add(const Cell& a, const Cell& b) {
  CellOps::require_same_width(a, b);
  Cell r = CellOps::add_mod(a, b);
  const bool overflow = a.is_negative() == b.is_negative() && r.is_negative() != a.is_negative();
  return {r, overflow};
}

inline ArithResult sub(const Cell& a, const Cell& b) {
  CellOps::require_same_width(a, b);
  Cell r = CellOps::add_mod(a, b.complement());
  const bool overflow = a.is_negative() != b.is_negative() && r.is_negative() != a.is_negative();
  return {r, overflow};
}

inline ArithResult mul(const Cell& a, const Cell& b) { return CellOps::mul(a, b); }

// Quotient truncated toward zero; throws DivisionByZero.
inline ArithResult div(const Cell& a, const Cell& b) { return CellOps::div(a, b); }

}  // namespace ae

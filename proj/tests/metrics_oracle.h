#pragma once

// Classification metrics recomputed in exact rational arithmetic. Counts
// come from scanning every cell; each score is built as a reduced fraction
// of 128-bit integers following the textbook definitions (precision, recall,
// harmonic-mean F1, unweighted and support-weighted means) and is rounded to
// the nearest double only at the end.

#include <cmath>
#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <vector>

namespace genre::testing::oracle {

using i128 = __int128;

struct Fraction {
  i128 num = 0;
  i128 den = 1;
};

inline i128 gcd128(i128 a, i128 b) {
  if (a < 0) a = -a;
  while (b != 0) {
    const i128 t = a % b;
    a = b;
    b = t;
  }
  return a;
}

inline Fraction reduce(i128 num, i128 den) {
  if (den == 0) throw std::logic_error("zero denominator");
  if (num == 0) return {0, 1};
  const i128 g = gcd128(num, den);
  return {num / g, den / g};
}

inline Fraction add(Fraction a, Fraction b) {
  const i128 g = gcd128(a.den, b.den);
  const i128 lcm = a.den / g * b.den;
  return reduce(a.num * (lcm / a.den) + b.num * (lcm / b.den), lcm);
}

inline Fraction mul(Fraction a, Fraction b) {
  const Fraction x = reduce(a.num, b.den);
  const Fraction y = reduce(b.num, a.den);
  return reduce(x.num * y.num, x.den * y.den);
}

inline Fraction div(Fraction a, Fraction b) { return mul(a, reduce(b.den, b.num)); }

/// Nearest double to a non-negative fraction, ties to even, by binary long
/// division (no intermediate floating point).
inline double to_double(Fraction f) {
  if (f.num == 0) return 0.0;
  i128 q = f.num / f.den;
  i128 rem = f.num % f.den;
  // Collect 54 significant bits (53 + one rounding bit) then a sticky flag.
  std::uint64_t mant = 0;
  int bits = 0;
  int exp = 0;
  if (q > 0) {
    int top = 127;
    while (((q >> top) & 1) == 0) --top;
    for (int b = top; b >= 0; --b) {
      if (bits < 54) {
        mant = (mant << 1) | static_cast<std::uint64_t>((q >> b) & 1);
        ++bits;
      } else if ((q >> b) & 1) {
        rem += 1;  // any lost integer bit makes the tail nonzero
      }
    }
    exp = top - (bits - 1);
  } else {
    exp = 0;
    // Skip leading fractional zeros.
    while (true) {
      rem *= 2;
      --exp;
      if (rem >= f.den) {
        rem -= f.den;
        mant = 1;
        bits = 1;
        break;
      }
    }
  }
  while (bits < 54) {
    rem *= 2;
    --exp;
    mant <<= 1;
    if (rem >= f.den) {
      rem -= f.den;
      mant |= 1;
    }
    ++bits;
  }
  const bool round_bit = mant & 1;
  mant >>= 1;
  ++exp;
  const bool sticky = rem != 0;
  if (round_bit && (sticky || (mant & 1))) ++mant;
  return std::ldexp(static_cast<double>(mant), exp);
}

struct Scores {
  std::vector<double> precision, recall, f1;
  std::vector<std::int64_t> support;
  double accuracy = 0.0;
  double macro_p = 0.0, macro_r = 0.0, macro_f1 = 0.0;
  double weighted_p = 0.0, weighted_r = 0.0, weighted_f1 = 0.0;
};

inline Scores metrics(const std::vector<std::vector<std::int64_t>>& cm) {
  const std::size_t c = cm.size();
  Scores s;
  i128 total = 0;
  i128 correct = 0;
  std::vector<Fraction> p(c), r(c), f(c);
  std::vector<i128> support(c);
  for (std::size_t t = 0; t < c; ++t) {
    i128 tp = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < c; ++i) {
      for (std::size_t j = 0; j < c; ++j) {
        if (i == t && j == t) tp += cm[i][j];
        else if (j == t) fp += cm[i][j];
        else if (i == t) fn += cm[i][j];
      }
    }
    p[t] = tp + fp == 0 ? Fraction{} : reduce(tp, tp + fp);
    r[t] = tp + fn == 0 ? Fraction{} : reduce(tp, tp + fn);
    const Fraction pr_sum = add(p[t], r[t]);
    f[t] = pr_sum.num == 0 ? Fraction{} : div(mul({2, 1}, mul(p[t], r[t])), pr_sum);
    support[t] = tp + fn;
    total += tp + fn;
    correct += tp;
  }
  Fraction mp, mr, mf, wp, wr, wf;
  for (std::size_t t = 0; t < c; ++t) {
    mp = add(mp, p[t]);
    mr = add(mr, r[t]);
    mf = add(mf, f[t]);
    const Fraction w = reduce(support[t], total);
    wp = add(wp, mul(w, p[t]));
    wr = add(wr, mul(w, r[t]));
    wf = add(wf, mul(w, f[t]));
  }
  const Fraction n{static_cast<i128>(c), 1};
  for (std::size_t t = 0; t < c; ++t) {
    s.precision.push_back(to_double(p[t]));
    s.recall.push_back(to_double(r[t]));
    s.f1.push_back(to_double(f[t]));
    s.support.push_back(static_cast<std::int64_t>(support[t]));
  }
  s.accuracy = to_double(reduce(correct, total));
  s.macro_p = to_double(div(mp, n));
  s.macro_r = to_double(div(mr, n));
  s.macro_f1 = to_double(div(mf, n));
  s.weighted_p = to_double(wp);
  s.weighted_r = to_double(wr);
  s.weighted_f1 = to_double(wf);
  return s;
}

}  // namespace genre::testing::oracle

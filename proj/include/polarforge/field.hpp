#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

namespace polarforge {

/// Field elements are dense codes 0..q-1: the base-p digits of a code are the
/// polynomial-basis coefficients, lowest degree first.
using Element = std::uint32_t;

class Field;
using FieldPtr = std::shared_ptr<const Field>;

/// Finite field GF(p^e) with log/antilog multiplication tables.
class Field {
public:
    static constexpr std::uint32_t kMaxSize = 1u << 16;

    /// `irreducible` lists c_0..c_{e-1} of the monic modulus x^e + c_{e-1}x^{e-1} + ... + c_0.
    /// It is ignored for e == 1.
    static FieldPtr make(std::uint32_t p, std::uint32_t e, std::vector<std::uint32_t> irreducible);

    /// GF(p^e) using the lexicographically first irreducible modulus; memoized.
    static FieldPtr standard(std::uint32_t p, std::uint32_t e);

    /// GF(q) for a prime power q, via standard().
    static FieldPtr of_size(std::uint32_t q);

    /// Parses `p e c_0 ... c_{e-1}` (prime fields: `p 1`).
    static FieldPtr parse(std::string_view line);

    std::uint32_t p() const { return p_; }
    std::uint32_t e() const { return e_; }
    std::uint32_t q() const { return q_; }
    const std::vector<std::uint32_t>& modulus() const { return modulus_; }
    Element primitive() const { return exp_[1]; }

    std::string to_line() const;
    std::string name() const;

    Element add(Element a, Element b) const;
    Element sub(Element a, Element b) const;
    Element neg(Element a) const;
    Element mul(Element a, Element b) const {
        if (a == 0 || b == 0) return 0;
        return exp_[log_[a] + log_[b]];
    }
    Element inv(Element a) const;
    Element div(Element a, Element b) const { return mul(a, inv(b)); }
    Element pow(Element a, std::uint64_t n) const;
    bool valid(Element a) const { return a < q_; }

    /// Same modulus and characteristic.
    bool operator==(const Field& o) const {
        return p_ == o.p_ && e_ == o.e_ && modulus_ == o.modulus_;
    }

private:
    Field(std::uint32_t p, std::uint32_t e, std::vector<std::uint32_t> modulus);

    Element slow_mul(Element a, Element b) const;
    Element digit_add(Element a, Element b, bool subtract) const;

    std::uint32_t p_, e_, q_;
    std::vector<std::uint32_t> modulus_;
    std::vector<Element> exp_;          // size 2(q-1)
    std::vector<std::uint32_t> log_;    // size q, log_[0] unused
    std::vector<std::uint8_t> add_;     // q*q table for odd p with q <= 256
};

/// True iff channels over `a` and `b` share an alphabet (same p and q).
inline bool same_alphabet(const Field& a, const Field& b) { return a.p() == b.p() && a.q() == b.q(); }

bool is_prime(std::uint64_t n);

}  // namespace polarforge

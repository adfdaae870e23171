#include "polarforge/field.hpp"

#include <map>
#include <mutex>
#include <sstream>

#include "polarforge/errors.hpp"

namespace polarforge {

bool is_prime(std::uint64_t n) {
    if (n < 2) return false;
    for (std::uint64_t d = 2; d * d <= n; ++d)
        if (n % d == 0) return false;
    return true;
}

namespace {

using Poly = std::vector<std::uint32_t>;  // coefficients low-to-high, over F_p

std::vector<std::uint64_t> prime_factors(std::uint64_t n) {
    std::vector<std::uint64_t> out;
    for (std::uint64_t d = 2; d * d <= n; ++d) {
        if (n % d == 0) {
            out.push_back(d);
            while (n % d == 0) n /= d;
        }
    }
    if (n > 1) out.push_back(n);
    return out;
}

// Remainder of a modulo monic b over F_p.
Poly poly_mod(Poly a, const Poly& b, std::uint32_t p) {
    const std::size_t db = b.size() - 1;
    while (a.size() > db) {
        const std::uint32_t lead = a.back();
        const std::size_t shift = a.size() - 1 - db;
        if (lead != 0)
            for (std::size_t i = 0; i <= db; ++i)
                a[shift + i] = (a[shift + i] + p - static_cast<std::uint32_t>((std::uint64_t{lead} * b[i]) % p)) % p;
        a.pop_back();
    }
    return a;
}

bool has_factor_of_degree(const Poly& f, std::uint32_t p, std::uint32_t d) {
    // enumerate monic g of degree d
    std::uint64_t count = 1;
    for (std::uint32_t i = 0; i < d; ++i) count *= p;
    for (std::uint64_t code = 0; code < count; ++code) {
        Poly g(d + 1, 0);
        std::uint64_t c = code;
        for (std::uint32_t i = 0; i < d; ++i) {
            g[i] = static_cast<std::uint32_t>(c % p);
            c /= p;
        }
        g[d] = 1;
        Poly r = poly_mod(f, g, p);
        bool zero = true;
        for (auto x : r) zero = zero && x == 0;
        if (zero) return true;
    }
    return false;
}

}  // namespace

Field::Field(std::uint32_t p, std::uint32_t e, std::vector<std::uint32_t> modulus)
    : p_(p), e_(e), q_(1), modulus_(std::move(modulus)) {
    for (std::uint32_t i = 0; i < e_; ++i) q_ *= p_;

    if (p_ != 2 && q_ <= 256) {
        add_.resize(std::size_t{q_} * q_);
        for (Element a = 0; a < q_; ++a)
            for (Element b = 0; b < q_; ++b)
                add_[std::size_t{a} * q_ + b] = static_cast<std::uint8_t>(digit_add(a, b, false));
    }

    // Find a primitive element: g^(q-1) = 1 and g^((q-1)/r) != 1 for every prime r | q-1.
    // Success also certifies that the modulus is irreducible.
    const std::uint64_t order = q_ - 1;
    const auto factors = prime_factors(order);
    auto slow_pow = [&](Element a, std::uint64_t n) {
        Element r = 1;
        while (n) {
            if (n & 1) r = slow_mul(r, a);
            a = slow_mul(a, a);
            n >>= 1;
        }
        return r;
    };
    Element gen = 0;
    if (q_ == 2) {
        gen = 1;
    } else {
        const Element limit = std::min<Element>(q_, 2048);
        for (Element g = 2; g < limit && gen == 0; ++g) {
            if (slow_pow(g, order) != 1) continue;
            bool ok = true;
            for (auto r : factors) ok = ok && slow_pow(g, order / r) != 1;
            if (ok) gen = g;
        }
    }
    if (gen == 0) throw ValidationError("modulus is reducible: GF(" + std::to_string(q_) + ") has no primitive element");

    exp_.resize(2 * std::size_t{order});
    log_.assign(q_, 0);
    Element x = 1;
    for (std::uint64_t i = 0; i < order; ++i) {
        exp_[i] = x;
        log_[x] = static_cast<std::uint32_t>(i);
        x = slow_mul(x, gen);
    }
    for (std::uint64_t i = order; i < 2 * order; ++i) exp_[i] = exp_[i - order];
}

FieldPtr Field::make(std::uint32_t p, std::uint32_t e, std::vector<std::uint32_t> irreducible) {
    if (!is_prime(p)) throw ValidationError("field characteristic " + std::to_string(p) + " is not prime");
    if (e < 1) throw ValidationError("extension degree must be >= 1");
    std::uint64_t q = 1;
    for (std::uint32_t i = 0; i < e; ++i) {
        q *= p;
        if (q > kMaxSize) throw ValidationError("field size exceeds 2^16");
    }
    if (e == 1) {
        irreducible.clear();
    } else {
        if (irreducible.size() != e)
            throw ValidationError("modulus needs " + std::to_string(e) + " coefficients, got " +
                                  std::to_string(irreducible.size()));
        for (auto c : irreducible)
            if (c >= p) throw ValidationError("modulus coefficient out of range for F_" + std::to_string(p));
        if (e <= 4) {
            Poly f(irreducible.begin(), irreducible.end());
            f.push_back(1);
            for (std::uint32_t d = 1; d <= e / 2; ++d)
                if (has_factor_of_degree(f, p, d))
                    throw ValidationError("modulus is reducible: it has a factor of degree " + std::to_string(d));
        }
    }
    return FieldPtr(new Field(p, e, std::move(irreducible)));
}

FieldPtr Field::standard(std::uint32_t p, std::uint32_t e) {
    static std::mutex mu;
    static std::map<std::pair<std::uint32_t, std::uint32_t>, FieldPtr> cache;
    std::lock_guard lock(mu);
    auto key = std::make_pair(p, e);
    if (auto it = cache.find(key); it != cache.end()) return it->second;

    if (!is_prime(p)) throw ValidationError("field characteristic " + std::to_string(p) + " is not prime");
    FieldPtr f;
    if (e == 1) {
        f = make(p, 1, {});
    } else {
        std::uint64_t count = 1;
        for (std::uint32_t i = 0; i < e; ++i) {
            count *= p;
            if (count > kMaxSize) throw ValidationError("field size exceeds 2^16");
        }
        // lexicographic scan over monic moduli with c_0 != 0
        for (std::uint64_t code = 1; code < count && !f; ++code) {
            std::vector<std::uint32_t> c(e);
            std::uint64_t v = code;
            for (std::uint32_t i = 0; i < e; ++i) {
                c[i] = static_cast<std::uint32_t>(v % p);
                v /= p;
            }
            if (c[0] == 0) continue;
            Poly full(c.begin(), c.end());
            full.push_back(1);
            bool reducible = false;
            for (std::uint32_t d = 1; d <= e / 2 && !reducible; ++d) reducible = has_factor_of_degree(full, p, d);
            if (reducible) continue;
            f = make(p, e, c);
        }
        if (!f) throw ValidationError("no irreducible modulus found");
    }
    cache.emplace(key, f);
    return f;
}

FieldPtr Field::of_size(std::uint32_t q) {
    if (q < 2) throw ValidationError("field size must be >= 2");
    std::uint32_t p = 0;
    for (std::uint32_t d = 2; d <= q; ++d)
        if (q % d == 0) {
            p = d;
            break;
        }
    std::uint32_t e = 0, r = q;
    while (r % p == 0) {
        r /= p;
        ++e;
    }
    if (r != 1) throw ValidationError(std::to_string(q) + " is not a prime power");
    return standard(p, e);
}

FieldPtr Field::parse(std::string_view line) {
    std::istringstream in{std::string(line)};
    long long p = 0, e = 0;
    if (!(in >> p >> e) || p <= 0 || e <= 0) throw ValidationError("field line must start with `p e`");
    std::vector<std::uint32_t> coeffs;
    long long c;
    while (in >> c) {
        if (c < 0) throw ValidationError("negative modulus coefficient");
        coeffs.push_back(static_cast<std::uint32_t>(c));
    }
    if (!in.eof()) throw ValidationError("non-numeric token in field line");
    if (e == 1 && !coeffs.empty()) throw ValidationError("prime field line takes no coefficients");
    return make(static_cast<std::uint32_t>(p), static_cast<std::uint32_t>(e), std::move(coeffs));
}

std::string Field::to_line() const {
    std::ostringstream out;
    out << p_ << ' ' << e_;
    for (auto c : modulus_) out << ' ' << c;
    return out.str();
}

std::string Field::name() const { return "GF(" + std::to_string(q_) + ")"; }

Element Field::digit_add(Element a, Element b, bool subtract) const {
    Element out = 0, scale = 1;
    for (std::uint32_t i = 0; i < e_; ++i) {
        const Element da = a % p_, db = b % p_;
        out += ((subtract ? da + p_ - db : da + db) % p_) * scale;
        a /= p_;
        b /= p_;
        scale *= p_;
    }
    return out;
}

Element Field::add(Element a, Element b) const {
    if (p_ == 2) return a ^ b;
    if (e_ == 1) return (a + b) % p_;
    if (!add_.empty()) return add_[std::size_t{a} * q_ + b];
    return digit_add(a, b, false);
}

Element Field::sub(Element a, Element b) const {
    if (p_ == 2) return a ^ b;
    if (e_ == 1) return (a + p_ - b) % p_;
    return digit_add(a, b, true);
}

Element Field::neg(Element a) const { return sub(0, a); }

Element Field::inv(Element a) const {
    if (a == 0) throw ValidationError("division by zero in " + name());
    return exp_[(q_ - 1) - log_[a]];
}

Element Field::pow(Element a, std::uint64_t n) const {
    if (n == 0) return 1;
    if (a == 0) return 0;
    return exp_[(std::uint64_t{log_[a]} * (n % (q_ - 1))) % (q_ - 1)];
}

Element Field::slow_mul(Element a, Element b) const {
    if (e_ == 1) return static_cast<Element>((std::uint64_t{a} * b) % p_);
    Poly pa(e_), pb(e_);
    for (std::uint32_t i = 0; i < e_; ++i) {
        pa[i] = a % p_;
        a /= p_;
        pb[i] = b % p_;
        b /= p_;
    }
    Poly prod(2 * e_ - 1, 0);
    for (std::uint32_t i = 0; i < e_; ++i)
        for (std::uint32_t j = 0; j < e_; ++j)
            prod[i + j] = static_cast<std::uint32_t>((prod[i + j] + std::uint64_t{pa[i]} * pb[j]) % p_);
    Poly mod(modulus_.begin(), modulus_.end());
    mod.push_back(1);
    prod = poly_mod(std::move(prod), mod, p_);
    Element out = 0, scale = 1;
    for (std::uint32_t i = 0; i < e_ && i < prod.size(); ++i) {
        out += prod[i] * scale;
        scale *= p_;
    }
    return out;
}

}  // namespace polarforge

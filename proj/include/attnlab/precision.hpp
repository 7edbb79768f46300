#pragma once

#include <boost/multiprecision/mpfr.hpp>

#include <cfloat>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <string>

#include "attnlab/errors.hpp"

namespace attnlab {

// Arbitrary-mantissa software float. Precision is set process-wide through
// BigFloat::default_precision (decimal digits); see PrecisionConfig::activate.
using BigFloat =
    boost::multiprecision::number<boost::multiprecision::mpfr_float_backend<0>,
                                  boost::multiprecision::et_off>;

// Numeric backend selection. Extended mode asks for a mantissa of at least
// `mantissa_bits` bits. Widths up to 64 are served by the x87 extended type
// (hardware speed); wider mantissas go through MPFR.
struct PrecisionConfig {
    enum class Mode { kDouble, kExtended };

    Mode mode = Mode::kDouble;
    unsigned mantissa_bits = 53;

    static PrecisionConfig double_precision() { return {}; }

    static PrecisionConfig extended(unsigned bits) {
        if (bits < 53) {
            throw InvalidInputError("extended precision requires mantissa_bits >= 53");
        }
        return {Mode::kExtended, bits};
    }

    bool is_extended() const { return mode == Mode::kExtended; }

    std::string label() const {
        if (mode == Mode::kDouble) return "double";
        return "ext:" + std::to_string(mantissa_bits);
    }

    static PrecisionConfig parse(const std::string& s) {
        if (s == "double") return double_precision();
        if (s.rfind("ext:", 0) == 0) {
            return extended(static_cast<unsigned>(std::strtoul(s.c_str() + 4, nullptr, 10)));
        }
        throw InvalidInputError("unknown precision '" + s + "' (use double or ext:<bits>)");
    }

    // Makes BigFloat temporaries wide enough for this config. A no-op for the
    // hardware-backed modes.
    void activate() const {
        if (mode == Mode::kExtended && mantissa_bits > 64) {
            // Boost counts decimal digits; round up so the realized mantissa
            // is at least the requested number of bits.
            const unsigned digits10 =
                static_cast<unsigned>(static_cast<double>(mantissa_bits) * 0.30103) + 2;
            BigFloat::default_precision(digits10);
        }
    }
};

// Scalar operations the engine needs, uniform across backends.
template <class R>
struct RealOps;

template <>
struct RealOps<double> {
    static constexpr const char* name() { return "double"; }
    static unsigned mantissa_bits() { return DBL_MANT_DIG; }
    static bool finite(double x) { return std::isfinite(x); }
    static double from_double(double x) { return x; }
    static double to_double(double x) { return x; }
    static double from_string(const std::string& s) { return std::strtod(s.c_str(), nullptr); }
    static std::string to_string(double x) {
        char buf[48];
        std::snprintf(buf, sizeof(buf), "%.17g", x);
        return buf;
    }
};

template <>
struct RealOps<long double> {
    static constexpr const char* name() { return "long double"; }
    static unsigned mantissa_bits() { return LDBL_MANT_DIG; }
    static bool finite(long double x) { return std::isfinite(x); }
    static long double from_double(double x) { return x; }
    static double to_double(long double x) { return static_cast<double>(x); }
    static long double from_string(const std::string& s) {
        return std::strtold(s.c_str(), nullptr);
    }
    static std::string to_string(long double x) {
        char buf[64];
        std::snprintf(buf, sizeof(buf), "%.21Lg", x);
        return buf;
    }
};

template <>
struct RealOps<BigFloat> {
    static constexpr const char* name() { return "mpfr"; }
    static unsigned mantissa_bits() {
        return static_cast<unsigned>(
            static_cast<double>(BigFloat::default_precision()) / 0.30103);
    }
    static bool finite(const BigFloat& x) { return boost::multiprecision::isfinite(x); }
    static BigFloat from_double(double x) { return BigFloat(x); }
    static double to_double(const BigFloat& x) { return x.convert_to<double>(); }
    static BigFloat from_string(const std::string& s) { return BigFloat(s); }
    static std::string to_string(const BigFloat& x) {
        // Enough decimal digits that parsing the string restores the value.
        return x.str(BigFloat::default_precision() + 4, std::ios_base::scientific);
    }
};

// Runs f with the scalar type matching cfg; f must be callable as f(Tag<R>{}).
template <class R>
struct RealTag {
    using type = R;
};

template <class F>
decltype(auto) with_real(const PrecisionConfig& cfg, F&& f) {
    cfg.activate();
    if (cfg.mode == PrecisionConfig::Mode::kDouble) return f(RealTag<double>{});
    if (cfg.mantissa_bits <= 64) return f(RealTag<long double>{});
    return f(RealTag<BigFloat>{});
}

}  // namespace attnlab

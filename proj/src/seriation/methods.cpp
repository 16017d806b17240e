#include "mrgen/errors.hpp"
#include "mrgen/seriation.hpp"

#include <string>

namespace mrgen {

namespace {

struct MethodName {
    Method method;
    std::string_view token;
};

constexpr std::array<MethodName, 10> kMethodNames = {{
    {Method::Spectral, "spectral"},
    {Method::SpectralNorm, "spectral_norm"},
    {Method::HCSingle, "hc_single"},
    {Method::HCComplete, "hc_complete"},
    {Method::HCAverage, "hc_average"},
    {Method::HCWard, "hc_ward"},
    {Method::OLOAverage, "olo_average"},
    {Method::VAT, "vat"},
    {Method::TSP, "tsp"},
    {Method::ARSA, "arsa"},
}};

} // namespace

std::string_view to_string(Method m) {
    for (const auto& e : kMethodNames)
        if (e.method == m) return e.token;
    return "unknown";
}

Method parse_method(std::string_view token) {
    for (const auto& e : kMethodNames)
        if (e.token == token) return e.method;
    throw ValidationError("unknown reordering method '" + std::string(token) + "'");
}

Permutation run_method(const DistanceMatrix& d, const MethodSpec& spec) {
    switch (spec.method) {
    case Method::Spectral: return spectral_order(d, false);
    case Method::SpectralNorm: return spectral_order(d, true);
    case Method::HCSingle: return hc_order(d, Linkage::Single).order;
    case Method::HCComplete: return hc_order(d, Linkage::Complete).order;
    case Method::HCAverage: return hc_order(d, Linkage::Average).order;
    case Method::HCWard: return hc_order(d, Linkage::Ward).order;
    case Method::OLOAverage: return olo_order(d, hc_order(d, Linkage::Average).tree);
    case Method::VAT: return vat_order(d);
    case Method::TSP: return tsp_order(d, spec.seed);
    case Method::ARSA: return arsa_order(d, spec.seed);
    }
    throw ValidationError("unhandled method");
}

} // namespace mrgen

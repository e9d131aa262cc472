#ifndef CFB_FACTOR_HPP
#define CFB_FACTOR_HPP

#include <cstdint>
#include <map>
#include <stdexcept>
#include <vector>

namespace cfb {

using VarId = int;

/// Dense nonnegative table over an ordered variable scope.
/// Storage is row-major in scope order: the last scope variable varies
/// fastest.
struct Factor {
    std::vector<VarId> scope;
    std::vector<int> cards;     // one cardinality per scope variable
    std::vector<double> values; // size == product of cards

    Factor() = default;
    Factor(std::vector<VarId> s, std::vector<int> c);
    Factor(std::vector<VarId> s, std::vector<int> c, std::vector<double> v);

    static Factor unit() { return Factor({}, {}, {1.0}); }

    std::size_t size() const { return values.size(); }
    int position_of(VarId v) const; // -1 if absent

    /// Flat index of a full scope assignment.
    std::size_t index_of(const std::vector<int>& states) const;

    double total() const;
    void normalize(); // no-op on an all-zero factor
};

/// Pointwise product over the union scope. Scopes must agree on the
/// cardinality of shared variables.
Factor multiply(const Factor& a, const Factor& b);

/// Sums a variable out of the scope; total mass is preserved.
Factor marginalize(const Factor& f, VarId out);

/// Fixes a scope variable to a state and drops it from the scope.
Factor reduce(const Factor& f, VarId var, int state);

/// Exact inference by bucket elimination with a min-fill order.
/// Returns the unnormalized joint over `targets` consistent with
/// `evidence`; an impossible evidence slice yields an all-zero factor.
Factor variable_elimination(const std::vector<Factor>& factors,
                            const std::vector<VarId>& targets,
                            const std::map<VarId, int>& evidence);

/// Min-fill elimination order over the factor interaction graph,
/// restricted to `to_eliminate`; ties broken by variable id.
std::vector<VarId> min_fill_order(const std::vector<Factor>& factors,
                                  const std::vector<VarId>& to_eliminate);

} // namespace cfb

#endif

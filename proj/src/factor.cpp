#include "cfb/factor.hpp"

#include <algorithm>
#include <set>

namespace cfb {

namespace {

std::size_t card_product(const std::vector<int>& cards) {
    std::size_t n = 1;
    for (int c : cards) {
        if (c < 1) throw std::invalid_argument("factor cardinality must be >= 1");
        n *= static_cast<std::size_t>(c);
    }
    return n;
}

} // namespace

Factor::Factor(std::vector<VarId> s, std::vector<int> c)
    : scope(std::move(s)), cards(std::move(c)), values(card_product(cards), 0.0) {
    if (scope.size() != cards.size())
        throw std::invalid_argument("scope/cardinality length mismatch");
}

Factor::Factor(std::vector<VarId> s, std::vector<int> c, std::vector<double> v)
    : scope(std::move(s)), cards(std::move(c)), values(std::move(v)) {
    if (scope.size() != cards.size())
        throw std::invalid_argument("scope/cardinality length mismatch");
    if (values.size() != card_product(cards))
        throw std::invalid_argument("factor value count does not match scope");
}

int Factor::position_of(VarId v) const {
    for (std::size_t i = 0; i < scope.size(); ++i)
        if (scope[i] == v) return static_cast<int>(i);
    return -1;
}

std::size_t Factor::index_of(const std::vector<int>& states) const {
    std::size_t idx = 0;
    for (std::size_t i = 0; i < scope.size(); ++i)
        idx = idx * static_cast<std::size_t>(cards[i]) + static_cast<std::size_t>(states[i]);
    return idx;
}

double Factor::total() const {
    double t = 0.0;
    for (double v : values) t += v;
    return t;
}

void Factor::normalize() {
    double t = total();
    if (t <= 0.0) return;
    for (double& v : values) v /= t;
}

Factor multiply(const Factor& a, const Factor& b) {
    // Result scope: a's scope followed by b's extra variables.
    std::vector<VarId> scope = a.scope;
    std::vector<int> cards = a.cards;
    for (std::size_t i = 0; i < b.scope.size(); ++i) {
        int pa = a.position_of(b.scope[i]);
        if (pa < 0) {
            scope.push_back(b.scope[i]);
            cards.push_back(b.cards[i]);
        } else if (a.cards[pa] != b.cards[i]) {
            throw std::invalid_argument("cardinality mismatch for shared variable");
        }
    }

    Factor out(scope, cards);
    const std::size_t n = out.size();
    const std::size_t k = scope.size();

    // Strides of each result variable into a and b.
    std::vector<std::size_t> stride_a(k, 0), stride_b(k, 0);
    {
        std::size_t s = 1;
        for (int i = static_cast<int>(a.scope.size()) - 1; i >= 0; --i) {
            int p = out.position_of(a.scope[i]);
            stride_a[p] = s;
            s *= static_cast<std::size_t>(a.cards[i]);
        }
        s = 1;
        for (int i = static_cast<int>(b.scope.size()) - 1; i >= 0; --i) {
            int p = out.position_of(b.scope[i]);
            stride_b[p] = s;
            s *= static_cast<std::size_t>(b.cards[i]);
        }
    }

    std::vector<int> state(k, 0);
    std::size_t ia = 0, ib = 0;
    for (std::size_t i = 0; i < n; ++i) {
        out.values[i] = a.values[ia] * b.values[ib];
        // odometer increment, last variable fastest
        for (int d = static_cast<int>(k) - 1; d >= 0; --d) {
            ia += stride_a[d];
            ib += stride_b[d];
            if (++state[d] < cards[d]) break;
            state[d] = 0;
            ia -= stride_a[d] * static_cast<std::size_t>(cards[d]);
            ib -= stride_b[d] * static_cast<std::size_t>(cards[d]);
        }
    }
    return out;
}

Factor marginalize(const Factor& f, VarId out) {
    int p = f.position_of(out);
    if (p < 0) throw std::invalid_argument("variable not in factor scope");

    std::vector<VarId> scope;
    std::vector<int> cards;
    for (std::size_t i = 0; i < f.scope.size(); ++i) {
        if (static_cast<int>(i) == p) continue;
        scope.push_back(f.scope[i]);
        cards.push_back(f.cards[i]);
    }
    Factor res(scope, cards);

    std::size_t inner = 1; // stride of the summed variable
    for (std::size_t i = static_cast<std::size_t>(p) + 1; i < f.scope.size(); ++i)
        inner *= static_cast<std::size_t>(f.cards[i]);
    const std::size_t c = static_cast<std::size_t>(f.cards[p]);
    const std::size_t outer = f.size() / (inner * c);

    std::size_t src = 0;
    std::size_t dst = 0;
    for (std::size_t o = 0; o < outer; ++o) {
        for (std::size_t s = 0; s < c; ++s)
            for (std::size_t i = 0; i < inner; ++i)
                res.values[dst + i] += f.values[src + s * inner + i];
        src += c * inner;
        dst += inner;
    }
    return res;
}

Factor reduce(const Factor& f, VarId var, int state) {
    int p = f.position_of(var);
    if (p < 0) throw std::invalid_argument("variable not in factor scope");
    if (state < 0 || state >= f.cards[p])
        throw std::invalid_argument("state out of range in reduce");

    std::vector<VarId> scope;
    std::vector<int> cards;
    for (std::size_t i = 0; i < f.scope.size(); ++i) {
        if (static_cast<int>(i) == p) continue;
        scope.push_back(f.scope[i]);
        cards.push_back(f.cards[i]);
    }
    Factor res(scope, cards);

    std::size_t inner = 1;
    for (std::size_t i = static_cast<std::size_t>(p) + 1; i < f.scope.size(); ++i)
        inner *= static_cast<std::size_t>(f.cards[i]);
    const std::size_t c = static_cast<std::size_t>(f.cards[p]);
    const std::size_t outer = f.size() / (inner * c);

    for (std::size_t o = 0; o < outer; ++o)
        for (std::size_t i = 0; i < inner; ++i)
            res.values[o * inner + i] =
                f.values[(o * c + static_cast<std::size_t>(state)) * inner + i];
    return res;
}

std::vector<VarId> min_fill_order(const std::vector<Factor>& factors,
                                  const std::vector<VarId>& to_eliminate) {
    std::map<VarId, std::set<VarId>> adj;
    for (const Factor& f : factors)
        for (VarId a : f.scope)
            for (VarId b : f.scope)
                if (a != b) adj[a].insert(b);
    for (VarId v : to_eliminate) adj[v]; // isolated variables still get a node

    std::set<VarId> remaining(to_eliminate.begin(), to_eliminate.end());
    std::vector<VarId> order;
    order.reserve(remaining.size());

    while (!remaining.empty()) {
        VarId best = -1;
        long best_fill = -1;
        for (VarId v : remaining) {
            long fill = 0;
            const auto& nb = adj[v];
            for (auto it = nb.begin(); it != nb.end(); ++it)
                for (auto jt = std::next(it); jt != nb.end(); ++jt)
                    if (!adj[*it].count(*jt)) ++fill;
            if (best < 0 || fill < best_fill || (fill == best_fill && v < best)) {
                best = v;
                best_fill = fill;
            }
        }
        order.push_back(best);
        const auto nb = adj[best];
        for (VarId a : nb) {
            adj[a].erase(best);
            for (VarId b : nb)
                if (a != b) adj[a].insert(b);
        }
        adj.erase(best);
        remaining.erase(best);
    }
    return order;
}

Factor variable_elimination(const std::vector<Factor>& factors,
                            const std::vector<VarId>& targets,
                            const std::map<VarId, int>& evidence) {
    std::vector<Factor> pool;
    pool.reserve(factors.size());
    for (const Factor& f : factors) {
        Factor g = f;
        for (const auto& [v, s] : evidence) {
            if (g.position_of(v) >= 0) g = reduce(g, v, s);
        }
        pool.push_back(std::move(g));
    }

    std::set<VarId> keep(targets.begin(), targets.end());
    std::set<VarId> elim;
    for (const Factor& f : pool)
        for (VarId v : f.scope)
            if (!keep.count(v)) elim.insert(v);

    std::vector<VarId> order =
        min_fill_order(pool, std::vector<VarId>(elim.begin(), elim.end()));

    for (VarId v : order) {
        Factor prod = Factor::unit();
        std::vector<Factor> next;
        next.reserve(pool.size());
        bool any = false;
        for (Factor& f : pool) {
            if (f.position_of(v) >= 0) {
                prod = any ? multiply(prod, f) : std::move(f);
                any = true;
            } else {
                next.push_back(std::move(f));
            }
        }
        if (any) next.push_back(marginalize(prod, v));
        pool = std::move(next);
    }

    Factor result = Factor::unit();
    for (const Factor& f : pool) result = multiply(result, f);

    // Present the result with the requested scope order.
    for (VarId t : targets) {
        if (result.position_of(t) < 0)
            throw std::invalid_argument("target variable absent from all factor scopes");
    }
    Factor shaped = Factor::unit();
    for (VarId t : targets) {
        int p = result.position_of(t);
        Factor ones({t}, {result.cards[p]},
                    std::vector<double>(static_cast<std::size_t>(result.cards[p]), 1.0));
        shaped = multiply(shaped, ones);
    }
    // shaped carries the target order; multiply aligns result onto it.
    return multiply(shaped, result);
}

} // namespace cfb

#include "cfb/inference.hpp"

#include <cmath>
#include <stdexcept>

namespace cfb {

EndogenousBN endogenous_bn_from_data(const Pscm& model, const Dataset& data) {
    const auto dec = c_components(model);
    EndogenousBN bn;
    Dataset agg = data.aggregated();

    for (VarId v : model.endogenous()) {
        int ci = dec.component_of.at(v);
        const auto& comp = dec.components[static_cast<std::size_t>(ci)];
        const std::vector<VarId>& given = comp.predecessors.at(v);

        EndogenousBN::Cpt cpt;
        cpt.child = v;
        cpt.given = given;

        std::vector<VarId> scope = given;
        scope.push_back(v);
        std::vector<int> cards;
        for (VarId s : scope) cards.push_back(model.card(s));
        Factor counts(scope, cards);

        for (const auto& row : agg.rows) {
            std::vector<int> st;
            bool ok = true;
            for (VarId s : scope) {
                int col = agg.column_of(s);
                int val = col >= 0 ? row.states[static_cast<std::size_t>(col)] : kMissing;
                if (val == kMissing) {
                    ok = false;
                    break;
                }
                st.push_back(val);
            }
            if (ok) counts.values[counts.index_of(st)] += row.count;
        }

        const std::size_t cc = static_cast<std::size_t>(model.card(v));
        const std::size_t n_cfg = counts.size() / cc;
        cpt.unseen.assign(n_cfg, false);
        for (std::size_t cfg = 0; cfg < n_cfg; ++cfg) {
            double tot = 0.0;
            for (std::size_t y = 0; y < cc; ++y) tot += counts.values[cfg * cc + y];
            if (tot <= 0.0) {
                cpt.unseen[cfg] = true;
                for (std::size_t y = 0; y < cc; ++y)
                    counts.values[cfg * cc + y] = 1.0 / static_cast<double>(cc);
            } else {
                for (std::size_t y = 0; y < cc; ++y) counts.values[cfg * cc + y] /= tot;
            }
        }
        cpt.table = std::move(counts);
        bn.cpts.push_back(std::move(cpt));
    }
    return bn;
}

double assignment_probability(const Fscm& fscm, const std::map<VarId, int>& assignment) {
    std::vector<Factor> fs = fscm_factors(fscm);
    Factor z = variable_elimination(fs, {}, assignment);
    return z.values.at(0);
}

ExoPosterior posterior_exogenous(const Fscm& fscm, const std::map<VarId, int>& record) {
    ExoPosterior post;
    std::vector<Factor> fs = fscm_factors(fscm);
    bool first = true;
    for (VarId u : fscm.model.exogenous()) {
        Factor m = variable_elimination(fs, {u}, record);
        double z = m.total();
        if (first) {
            post.zero_evidence = (z <= 0.0);
            first = false;
        }
        if (z > 0.0)
            for (double& x : m.values) x /= z;
        post.pmfs[u] = std::move(m.values);
    }
    return post;
}

double log_likelihood(const Fscm& fscm, const Dataset& data) {
    Dataset agg = data.aggregated();
    std::vector<Factor> fs = fscm_factors(fscm);
    double ll = 0.0;
    for (const auto& row : agg.rows) {
        Factor z = variable_elimination(fs, {}, agg.row_assignment(row));
        double p = z.values.at(0);
        if (p <= 0.0) return kNegInf;
        ll += row.count * std::log(p);
    }
    return ll;
}

Dataset biased_to_records(const Pscm& selector_model, VarId selector, const BiasedDataset& data) {
    Dataset out = data.selected;
    if (out.column_of(selector) < 0) {
        out.columns.push_back(selector);
        for (auto& row : out.rows) row.states.push_back(1);
    }
    if (data.n_unselected > 0.0) {
        Dataset::Row masked;
        masked.states.assign(out.columns.size(), kMissing);
        masked.states[static_cast<std::size_t>(out.column_of(selector))] = 0;
        masked.count = data.n_unselected;
        out.rows.push_back(std::move(masked));
    }
    (void)selector_model;
    return out;
}

double log_likelihood_biased(const Fscm& fscm, VarId selector, const BiasedDataset& data) {
    return log_likelihood(fscm, biased_to_records(fscm.model, selector, data));
}

double max_log_likelihood(const Pscm& model, const Dataset& data) {
    Dataset agg = data.aggregated();
    const double n_total = agg.total_count();
    if (n_total <= 0.0) return 0.0;

    bool complete = true;
    for (const auto& row : agg.rows)
        if (!agg.row_complete(row)) {
            complete = false;
            break;
        }
    for (VarId v : model.endogenous())
        if (complete && agg.column_of(v) < 0) complete = false;

    if (!complete) {
        // Masked records: multinomial maximum over the observed
        // coarsening, each distinct observation pattern being one state
        // of the reduced variable.
        double ll = 0.0;
        for (const auto& row : agg.rows)
            if (row.count > 0.0) ll += row.count * std::log(row.count / n_total);
        return ll;
    }

    // Complete data: the decomposable multinomial maximum at frequency
    // parameters of the endogenous BN.
    const auto dec = c_components(model);
    double ll = 0.0;
    for (VarId v : model.endogenous()) {
        int ci = dec.component_of.at(v);
        const auto& comp = dec.components[static_cast<std::size_t>(ci)];
        std::vector<VarId> scope = comp.predecessors.at(v);
        scope.push_back(v);

        std::map<std::vector<int>, double> joint;   // (w_V, v) counts
        std::map<std::vector<int>, double> context; // w_V counts
        for (const auto& row : agg.rows) {
            std::vector<int> st;
            for (VarId s : scope) {
                int col = agg.column_of(s);
                st.push_back(row.states[static_cast<std::size_t>(col)]);
            }
            joint[st] += row.count;
            st.pop_back();
            context[st] += row.count;
        }
        for (const auto& [st, n] : joint) {
            if (n <= 0.0) continue;
            std::vector<int> ctx(st.begin(), st.end() - 1);
            ll += n * std::log(n / context.at(ctx));
        }
    }
    return ll;
}

LikelihoodReport likelihood_report(const Fscm& fscm, const Dataset& data) {
    LikelihoodReport rep;
    rep.ll = log_likelihood(fscm, data);
    rep.ll_star = max_log_likelihood(fscm.model, data);
    rep.gap = rep.ll_star - rep.ll;
    return rep;
}

} // namespace cfb

#include "cfb/dataset.hpp"

#include <map>
#include <stdexcept>

namespace cfb {

double Dataset::total_count() const {
    double t = 0.0;
    for (const Row& r : rows) t += r.count;
    return t;
}

int Dataset::column_of(VarId v) const {
    for (std::size_t i = 0; i < columns.size(); ++i)
        if (columns[i] == v) return static_cast<int>(i);
    return -1;
}

bool Dataset::row_complete(const Row& r) const {
    for (int s : r.states)
        if (s == kMissing) return false;
    return true;
}

Dataset Dataset::aggregated() const {
    Dataset out;
    out.columns = columns;
    std::map<std::vector<int>, std::size_t> index;
    for (const Row& r : rows) {
        auto it = index.find(r.states);
        if (it == index.end()) {
            index.emplace(r.states, out.rows.size());
            out.rows.push_back(r);
        } else {
            out.rows[it->second].count += r.count;
        }
    }
    return out;
}

Dataset Dataset::project(const std::vector<VarId>& cols) const {
    Dataset out;
    out.columns = cols;
    std::vector<int> idx;
    for (VarId v : cols) {
        int c = column_of(v);
        if (c < 0) throw std::invalid_argument("projection column absent from dataset");
        idx.push_back(c);
    }
    for (const Row& r : rows) {
        Row nr;
        nr.count = r.count;
        for (int c : idx) nr.states.push_back(r.states[static_cast<std::size_t>(c)]);
        out.rows.push_back(std::move(nr));
    }
    return out;
}

std::map<VarId, int> Dataset::row_assignment(const Row& r) const {
    std::map<VarId, int> a;
    for (std::size_t i = 0; i < columns.size(); ++i)
        if (r.states[i] != kMissing) a[columns[i]] = r.states[i];
    return a;
}

} // namespace cfb

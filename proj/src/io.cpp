#include "cfb/io.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace cfb {

using nlohmann::json;

namespace {

std::string status_name(RunStatus s) {
    switch (s) {
        case RunStatus::global_max: return "global_max";
        case RunStatus::saddle_suspect: return "saddle_suspect";
        case RunStatus::max_iters: return "max_iters";
        case RunStatus::incompatible_suspect: return "incompatible_suspect";
    }
    return "unknown";
}

std::string fmt(double x) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

VarId require_var(const ModelDoc& doc, const std::string& name) {
    VarId v = doc.model.find(name);
    if (v < 0) throw std::runtime_error("unknown variable: " + name);
    return v;
}

int require_state(const ModelDoc& doc, VarId v, const json& j) {
    int s;
    if (j.is_number_integer()) {
        s = j.get<int>();
    } else {
        s = doc.state_of(v, j.get<std::string>());
        if (s < 0)
            throw std::runtime_error("unknown state '" + j.get<std::string>() + "' of " +
                                     doc.model.name(v));
    }
    if (s < 0 || s >= doc.model.card(v))
        throw std::runtime_error("state index out of range for " + doc.model.name(v));
    return s;
}

} // namespace

int ModelDoc::state_of(VarId v, const std::string& name) const {
    const auto& names = state_names[static_cast<std::size_t>(v)];
    for (std::size_t i = 0; i < names.size(); ++i)
        if (names[i] == name) return static_cast<int>(i);
    return -1;
}

ModelDoc parse_model(const std::string& json_text) {
    json j = json::parse(json_text);
    ModelDoc doc;
    for (const auto& jv : j.at("variables")) {
        Variable var;
        var.name = jv.at("name").get<std::string>();
        var.cardinality = jv.at("cardinality").get<int>();
        std::string kind = jv.at("kind").get<std::string>();
        if (kind == "exogenous")
            var.kind = Kind::exogenous;
        else if (kind == "endogenous")
            var.kind = Kind::endogenous;
        else
            throw std::runtime_error("unknown variable kind: " + kind);
        doc.model.vars.push_back(var);
        doc.model.equations.emplace_back();

        std::vector<std::string> names;
        if (jv.contains("states")) {
            names = jv.at("states").get<std::vector<std::string>>();
            if (static_cast<int>(names.size()) != var.cardinality)
                throw std::runtime_error("state-name count mismatch for " + var.name);
        } else {
            for (int s = 0; s < var.cardinality; ++s) names.push_back(std::to_string(s));
        }
        doc.state_names.push_back(std::move(names));
    }

    for (const auto& je : j.at("equations")) {
        StructuralEquation eq;
        eq.child = require_var(doc, je.at("child").get<std::string>());
        for (const auto& jp : je.at("parents")) eq.parents.push_back(require_var(doc, jp.get<std::string>()));
        eq.table = je.at("table").get<std::vector<int>>();
        doc.model.equations[static_cast<std::size_t>(eq.child)] = std::move(eq);
    }

    if (j.contains("arcs")) {
        // Arcs are implied by the equations; a stated arc list must agree.
        std::set<std::pair<VarId, VarId>> declared;
        for (const auto& ja : j.at("arcs"))
            declared.insert({require_var(doc, ja.at(0).get<std::string>()),
                             require_var(doc, ja.at(1).get<std::string>())});
        std::set<std::pair<VarId, VarId>> implied;
        for (const auto& a : doc.model.arcs()) implied.insert(a);
        if (declared != implied) throw std::runtime_error("arc list disagrees with equations");
    }
    return doc;
}

ModelDoc load_model(const std::string& path) { return parse_model(read_file(path)); }

std::string model_to_json(const ModelDoc& doc) {
    json j;
    j["variables"] = json::array();
    for (std::size_t i = 0; i < doc.model.vars.size(); ++i) {
        const Variable& v = doc.model.vars[i];
        json jv;
        jv["name"] = v.name;
        jv["cardinality"] = v.cardinality;
        jv["kind"] = v.kind == Kind::exogenous ? "exogenous" : "endogenous";
        jv["states"] = doc.state_names[i];
        j["variables"].push_back(jv);
    }
    j["arcs"] = json::array();
    for (const auto& [p, c] : doc.model.arcs())
        j["arcs"].push_back({doc.model.name(p), doc.model.name(c)});
    j["equations"] = json::array();
    for (const auto& eq : doc.model.equations) {
        if (!eq) continue;
        json je;
        je["child"] = doc.model.name(eq->child);
        je["parents"] = json::array();
        for (VarId p : eq->parents) je["parents"].push_back(doc.model.name(p));
        je["table"] = eq->table;
        j["equations"].push_back(je);
    }
    return j.dump(2) + "\n";
}

void save_model(const ModelDoc& doc, const std::string& path) {
    write_file(path, model_to_json(doc));
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur += c;
        }
    }
    out.push_back(cur);
    for (auto& s : out) {
        std::size_t b = s.find_first_not_of(" \t");
        std::size_t e = s.find_last_not_of(" \t");
        s = b == std::string::npos ? "" : s.substr(b, e - b + 1);
    }
    return out;
}

} // namespace

Dataset parse_dataset_csv(const std::string& csv_text, const ModelDoc& doc) {
    std::istringstream in(csv_text);
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("empty dataset");
    std::vector<std::string> header = split_csv_line(line);

    Dataset data;
    int count_col = -1;
    std::vector<VarId> col_var(header.size(), -1);
    for (std::size_t i = 0; i < header.size(); ++i) {
        if (header[i] == "count") {
            count_col = static_cast<int>(i);
            continue;
        }
        VarId v = require_var(doc, header[i]);
        col_var[i] = v;
        data.columns.push_back(v);
    }

    int line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        std::vector<std::string> cells = split_csv_line(line);
        if (cells.size() != header.size())
            throw std::runtime_error("dataset line " + std::to_string(line_no) +
                                     ": wrong cell count");
        Dataset::Row row;
        for (std::size_t i = 0; i < cells.size(); ++i) {
            if (static_cast<int>(i) == count_col) {
                row.count = std::stod(cells[i]);
                continue;
            }
            const std::string& cell = cells[i];
            VarId v = col_var[i];
            if (cell.empty() || cell == "?" || cell == "*") {
                row.states.push_back(kMissing);
                continue;
            }
            int s = doc.state_of(v, cell);
            if (s < 0) {
                try {
                    std::size_t used = 0;
                    s = std::stoi(cell, &used);
                    if (used != cell.size()) s = -1;
                } catch (const std::exception&) {
                    s = -1;
                }
            }
            if (s < 0 || s >= doc.model.card(v))
                throw std::runtime_error("dataset line " + std::to_string(line_no) +
                                         ": bad state '" + cell + "' for " + doc.model.name(v));
            row.states.push_back(s);
        }
        data.rows.push_back(std::move(row));
    }
    return data;
}

Dataset load_dataset(const std::string& path, const ModelDoc& doc) {
    return parse_dataset_csv(read_file(path), doc);
}

std::string dataset_to_csv(const Dataset& data, const ModelDoc& doc) {
    std::ostringstream out;
    for (std::size_t i = 0; i < data.columns.size(); ++i) {
        if (i) out << ",";
        out << doc.model.name(data.columns[i]);
    }
    out << ",count\n";
    for (const auto& row : data.rows) {
        for (std::size_t i = 0; i < row.states.size(); ++i) {
            if (i) out << ",";
            int s = row.states[i];
            if (s == kMissing)
                out << "*";
            else
                out << doc.state_names[static_cast<std::size_t>(data.columns[i])]
                                      [static_cast<std::size_t>(s)];
        }
        out << "," << fmt(row.count) << "\n";
    }
    return out.str();
}

namespace {

// Compiles an equality/and/or expression over named states into a
// selector truth table.
void collect_expr_vars(const json& j, const ModelDoc& doc, std::set<VarId>& vars) {
    std::string op = j.at("op").get<std::string>();
    if (op == "eq") {
        vars.insert(require_var(doc, j.at("var").get<std::string>()));
    } else if (op == "and" || op == "or") {
        for (const auto& a : j.at("args")) collect_expr_vars(a, doc, vars);
    } else {
        throw std::runtime_error("unknown selector operator: " + op);
    }
}

bool eval_expr(const json& j, const ModelDoc& doc, const std::map<VarId, int>& st) {
    std::string op = j.at("op").get<std::string>();
    if (op == "eq") {
        VarId v = require_var(doc, j.at("var").get<std::string>());
        return st.at(v) == require_state(doc, v, j.at("state"));
    }
    bool conj = op == "and";
    for (const auto& a : j.at("args")) {
        bool b = eval_expr(a, doc, st);
        if (conj && !b) return false;
        if (!conj && b) return true;
    }
    return conj;
}

Selector parse_selector(const json& j, const ModelDoc& doc) {
    Selector sel;
    if (j.contains("scope")) {
        for (const auto& jv : j.at("scope")) sel.scope.push_back(require_var(doc, jv.get<std::string>()));
        sel.table = j.at("table").get<std::vector<int>>();
        sel.validate(doc.model);
        return sel;
    }
    const json& expr = j.contains("expr") ? j.at("expr") : j;
    std::set<VarId> vars;
    collect_expr_vars(expr, doc, vars);
    sel.scope.assign(vars.begin(), vars.end());

    std::vector<int> cards;
    std::size_t n = 1;
    for (VarId v : sel.scope) {
        cards.push_back(doc.model.card(v));
        n *= static_cast<std::size_t>(doc.model.card(v));
    }
    std::vector<int> st(sel.scope.size(), 0);
    for (std::size_t cfg = 0; cfg < n; ++cfg) {
        std::map<VarId, int> a;
        for (std::size_t i = 0; i < sel.scope.size(); ++i) a[sel.scope[i]] = st[i];
        sel.table.push_back(eval_expr(expr, doc, a) ? 1 : 0);
        for (std::size_t i = st.size(); i-- > 0;) {
            if (++st[i] < cards[i]) break;
            st[i] = 0;
        }
    }
    sel.validate(doc.model);
    return sel;
}

} // namespace

std::vector<StudySpec> parse_studies(const std::string& json_text, const ModelDoc& doc,
                                     const std::string& base_dir) {
    json j = json::parse(json_text);
    std::vector<StudySpec> studies;
    for (const auto& js : j) {
        StudySpec st;
        std::filesystem::path p = js.at("dataset").get<std::string>();
        if (p.is_relative() && !base_dir.empty()) p = std::filesystem::path(base_dir) / p;
        st.dataset = load_dataset(p.string(), doc);
        if (js.contains("intervened"))
            for (const auto& jv : js.at("intervened"))
                st.intervened_vars.push_back(require_var(doc, jv.get<std::string>()));
        if (js.contains("selector")) st.selector = parse_selector(js.at("selector"), doc);
        if (js.contains("n_unselected")) st.n_unselected = js.at("n_unselected").get<double>();
        if (js.contains("local_chances"))
            for (const auto& jv : js.at("local_chances"))
                st.local_chance_vars.push_back(require_var(doc, jv.get<std::string>()));
        studies.push_back(std::move(st));
    }
    return studies;
}

std::vector<StudySpec> load_studies(const std::string& path, const ModelDoc& doc) {
    return parse_studies(read_file(path), doc,
                         std::filesystem::path(path).parent_path().string());
}

QuerySpec parse_query(const std::string& json_text, const ModelDoc& doc) {
    json j = json::parse(json_text);
    std::string kind = j.at("kind").get<std::string>();

    auto term = [&](const json& jt) {
        WorldTerm t;
        t.world = jt.value("world", 0);
        VarId v = require_var(doc, jt.at("var").get<std::string>());
        t.var = v;
        t.state = require_state(doc, v, jt.at("state"));
        return t;
    };

    if (kind == "general") {
        QuerySpec q;
        q.kind = QueryKind::general;
        for (const auto& jw : j.at("worlds")) {
            WorldSpec w;
            if (jw.contains("do"))
                for (const auto& [name, jstate] : jw.at("do").items()) {
                    VarId v = require_var(doc, name);
                    w.interventions[v] = require_state(doc, v, jstate);
                }
            q.worlds.push_back(std::move(w));
        }
        for (const auto& jt : j.at("target")) q.target.push_back(term(jt));
        if (j.contains("evidence"))
            for (const auto& jt : j.at("evidence")) q.evidence.push_back(term(jt));
        return q;
    }

    VarId cause = require_var(doc, j.at("cause").get<std::string>());
    VarId effect = require_var(doc, j.at("effect").get<std::string>());
    int ct = j.contains("cause_true") ? require_state(doc, cause, j.at("cause_true")) : 1;
    int cf = j.contains("cause_false") ? require_state(doc, cause, j.at("cause_false")) : 0;
    int et = j.contains("effect_true") ? require_state(doc, effect, j.at("effect_true")) : 1;
    int ef = j.contains("effect_false") ? require_state(doc, effect, j.at("effect_false")) : 0;

    QuerySpec q;
    if (kind == "PNS" || kind == "pns")
        q = make_pns(cause, effect, ct, cf, et, ef);
    else if (kind == "PN" || kind == "pn")
        q = make_pn(cause, effect, ct, cf, et, ef);
    else if (kind == "PS" || kind == "ps")
        q = make_ps(cause, effect, ct, cf, et, ef);
    else
        throw std::runtime_error("unknown query kind: " + kind);

    if (j.contains("evidence"))
        for (const auto& jt : j.at("evidence")) q.evidence.push_back(term(jt));
    return q;
}

QuerySpec load_query(const std::string& path, const ModelDoc& doc) {
    return parse_query(read_file(path), doc);
}

std::uint64_t fnv1a64(const std::string& bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::string hex64(std::uint64_t x) {
    char buf[20];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(x));
    return buf;
}

std::string query_result_to_json(const QueryResult& res, const std::string& manifest_hash,
                                 std::uint64_t seed) {
    json j;
    j["manifest_hash"] = manifest_hash;
    j["seed"] = seed;
    j["range"] = {{"lower", res.lower}, {"upper", res.upper}};
    j["n_excluded"] = res.n_excluded;
    j["per_run"] = json::array();
    for (const auto& pr : res.per_run) {
        json jr;
        jr["run"] = pr.run;
        jr["status"] = status_name(pr.status);
        jr["defined"] = pr.defined;
        if (pr.defined) jr["value"] = pr.value;
        j["per_run"].push_back(jr);
    }
    return j.dump(2) + "\n";
}

std::string query_result_to_csv(const QueryResult& res, const std::string& manifest_hash,
                                std::uint64_t seed) {
    std::ostringstream out;
    out << "# manifest_hash=" << manifest_hash << "\n";
    out << "# seed=" << seed << "\n";
    out << "run,status,value\n";
    for (const auto& pr : res.per_run) {
        out << pr.run << "," << status_name(pr.status) << ",";
        if (pr.defined) out << fmt(pr.value);
        out << "\n";
    }
    return out.str();
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const std::string& path, const std::string& content) {
    std::filesystem::path p(path);
    if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write file: " + path);
    out << content;
}

} // namespace cfb

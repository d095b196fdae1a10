#include "dsoflex/grid.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <queue>
#include <sstream>

namespace dsoflex {

void finalize_topology(GridModel& g, Warnings* warnings) {
    const int N = g.num_nodes;
    if (N < 1) throw Error("grid: no nodes");
    for (const Line& l : g.lines) {
        if (l.from < 0 || l.from >= N || l.to < 0 || l.to >= N)
            throw Error("grid: line references unknown node");
        if (l.from == l.to) throw Error("grid: cycle detected (self-loop at node " + std::to_string(l.from) + ")");
        if (!(l.r_pu > 0) || !(l.x_pu > 0))
            throw Error("grid: negative or zero impedance on line " + std::to_string(l.from) + "-" +
                        std::to_string(l.to));
    }
    std::vector<std::vector<int>> adj(N);
    for (int k = 0; k < static_cast<int>(g.lines.size()); ++k) {
        adj[g.lines[k].from].push_back(k);
        adj[g.lines[k].to].push_back(k);
    }
    std::vector<int> parent(N, -2);
    std::vector<Line> ordered;
    std::queue<int> q;
    parent[0] = -1;
    q.push(0);
    while (!q.empty()) {
        const int u = q.front();
        q.pop();
        for (int k : adj[u]) {
            if (k == parent[u]) continue;
            const Line& l = g.lines[k];
            const int v = l.from == u ? l.to : l.from;
            if (parent[v] != -2)
                throw Error("grid: cycle detected through line " + std::to_string(l.from) + "-" +
                            std::to_string(l.to));
            parent[v] = k;
            ordered.push_back({u, v, l.r_pu, l.x_pu});
            q.push(v);
        }
    }
    for (int i = 0; i < N; ++i)
        if (parent[i] == -2) throw Error("grid: node " + std::to_string(i) + " is disconnected from the root");

    g.lines = std::move(ordered);
    g.parent_line.assign(N, -1);
    g.child_lines.assign(N, {});
    for (int k = 0; k < static_cast<int>(g.lines.size()); ++k) {
        g.parent_line[g.lines[k].to] = k;
        g.child_lines[g.lines[k].from].push_back(k);
    }

    if (static_cast<int>(g.v_lo.size()) != N || static_cast<int>(g.v_hi.size()) != N ||
        static_cast<int>(g.p_fix.size()) != N || static_cast<int>(g.q_fix.size()) != N)
        throw Error("grid: per-node tables have inconsistent sizes");
    for (int i = 1; i < N; ++i) {
        if (!(g.v_lo[i] <= g.v_hi[i])) throw Error("grid: v_lo > v_hi at node " + std::to_string(i));
        if (warnings && !(g.v_lo[i] <= 1.0 && 1.0 <= g.v_hi[i]))
            warnings->push_back("grid: voltage band at node " + std::to_string(i) + " excludes 1 p.u.");
    }
    if (!(g.s_base_kva > 0)) throw Error("grid: s_base must be > 0");
}

namespace {

std::string strip(const std::string& s) {
    const auto hash = s.find('#');
    std::string t = s.substr(0, hash);
    const auto b = t.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const auto e = t.find_last_not_of(" \t\r");
    return t.substr(b, e - b + 1);
}

double parse_number(const std::string& tok, const std::string& where) {
    try {
        std::size_t used = 0;
        const double v = std::stod(tok, &used);
        if (used != tok.size() || !std::isfinite(v)) throw std::invalid_argument(tok);
        return v;
    } catch (const std::exception&) {
        throw Error(where + ": expected a number, got '" + tok + "'");
    }
}

struct NodeRecord {
    double v_lo = std::sqrt(kDefaultVlo), v_hi = std::sqrt(kDefaultVhi);
    double p_kw = 0, q_kvar = 0;
    std::string shape = "flat";
};

}  // namespace

GridModel load_grid(std::istream& in, const TimeGrid& time, const std::string& origin,
                    Warnings* warnings) {
    time.validate();
    GridModel g;
    std::map<std::string, Profile> shapes;
    shapes["flat"] = Profile::Ones(time.T);
    std::map<int, NodeRecord> nodes;
    std::string section, raw;
    int lineno = 0, max_id = 0;
    while (std::getline(in, raw)) {
        ++lineno;
        const std::string where = origin + ":" + std::to_string(lineno);
        const std::string s = strip(raw);
        if (s.empty()) continue;
        if (s.front() == '[') {
            section = s;
            if (section != "[profiles]" && section != "[nodes]" && section != "[lines]")
                throw Error(where + ": unknown section " + section);
            continue;
        }
        std::istringstream ls(s);
        std::vector<std::string> tok;
        for (std::string t; ls >> t;) tok.push_back(t);
        if (section.empty()) {
            if (tok.size() != 2) throw Error(where + ": expected 'key value'");
            if (tok[0] == "s_base_kva") g.s_base_kva = parse_number(tok[1], where);
            else if (tok[0] == "v_base_kv") parse_number(tok[1], where);
            else throw Error(where + ": unknown key '" + tok[0] + "'");
        } else if (section == "[profiles]") {
            if (static_cast<int>(tok.size()) != time.T + 1)
                throw Error(where + ": profile '" + tok[0] + "' needs " + std::to_string(time.T) + " values");
            Profile p(time.T);
            for (int t = 0; t < time.T; ++t) p(t) = parse_number(tok[t + 1], where);
            shapes[tok[0]] = p;
        } else if (section == "[nodes]") {
            if (tok.size() != 6) throw Error(where + ": node row needs 'id v_lo v_hi p_kw q_kvar shape'");
            const int id = static_cast<int>(parse_number(tok[0], where));
            if (id < 0) throw Error(where + ": negative node id");
            if (nodes.count(id)) throw Error(where + ": duplicate node " + tok[0]);
            NodeRecord r;
            if (tok[1] != "-") r.v_lo = parse_number(tok[1], where);
            if (tok[2] != "-") r.v_hi = parse_number(tok[2], where);
            r.p_kw = parse_number(tok[3], where);
            r.q_kvar = parse_number(tok[4], where);
            r.shape = tok[5];
            nodes[id] = r;
            max_id = std::max(max_id, id);
        } else {
            if (tok.size() != 4) throw Error(where + ": line row needs 'from to r_pu x_pu'");
            Line l;
            l.from = static_cast<int>(parse_number(tok[0], where));
            l.to = static_cast<int>(parse_number(tok[1], where));
            l.r_pu = parse_number(tok[2], where);
            l.x_pu = parse_number(tok[3], where);
            if (l.from < 0 || l.to < 0) throw Error(where + ": negative node id");
            if (l.r_pu < 0 || l.x_pu < 0) throw Error(where + ": negative impedance");
            max_id = std::max({max_id, l.from, l.to});
            g.lines.push_back(l);
        }
    }
    g.num_nodes = max_id + 1;
    const int N = g.num_nodes;
    g.v_lo.assign(N, kDefaultVlo);
    g.v_hi.assign(N, kDefaultVhi);
    g.p_fix.assign(N, Profile::Zero(time.T));
    g.q_fix.assign(N, Profile::Zero(time.T));
    for (const auto& [id, r] : nodes) {
        const auto it = shapes.find(r.shape);
        if (it == shapes.end()) throw Error(origin + ": node " + std::to_string(id) + " uses unknown profile '" + r.shape + "'");
        g.v_lo[id] = r.v_lo * r.v_lo;
        g.v_hi[id] = r.v_hi * r.v_hi;
        g.p_fix[id] = r.p_kw * it->second;
        g.q_fix[id] = r.q_kvar * it->second;
    }
    try {
        finalize_topology(g, warnings);
    } catch (const Error& e) {
        throw Error(origin + ": " + e.what());
    }
    return g;
}

GridModel load_grid_file(const std::string& path, const TimeGrid& time, Warnings* warnings) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open grid file " + path);
    return load_grid(in, time, path, warnings);
}

ScenarioVars emit_lindistflow(const GridModel& g, lp::Builder& lp, const std::string& sc,
                              const std::vector<Attachment>& att, const LinDistFlowOptions& opt) {
    const int T = g.T(), N = g.num_nodes, L = static_cast<int>(g.lines.size());
    if (T < 1) throw Error("emit_lindistflow: grid has no time profiles");
    ScenarioVars v;
    v.name = sc;
    v.T = T;
    v.first_row = lp.num_rows();
    const std::string pre = sc + "_";
    v.P0 = lp.add_columns(pre + "P0", T, -lp::kInf, lp::kInf);
    for (int k = 0; k < L; ++k) {
        const std::string tag = std::to_string(g.lines[k].from) + "_" + std::to_string(g.lines[k].to);
        v.P_line.push_back(lp.add_columns(pre + "P_" + tag, T, -lp::kInf, lp::kInf));
        v.Q_line.push_back(lp.add_columns(pre + "Q_" + tag, T, -lp::kInf, lp::kInf));
    }
    for (int i = 0; i < N; ++i) {
        const double lo = i == 0 ? 1.0 : -lp::kInf, hi = i == 0 ? 1.0 : lp::kInf;
        v.V.push_back(lp.add_columns(pre + "V_" + std::to_string(i), T, lo, hi));
    }
    std::vector<std::vector<int>> at_node(N);
    for (int a = 0; a < static_cast<int>(att.size()); ++a) {
        if (att[a].node < 0 || att[a].node >= N)
            throw Error("emit_lindistflow: attachment at unknown node " + std::to_string(att[a].node));
        at_node[att[a].node].push_back(a);
        const std::string tag = std::to_string(a);
        v.P_h.push_back(lp.add_columns(pre + "Ph_" + tag, T, -lp::kInf, lp::kInf));
        v.Q_h.push_back(att[a].node == 0 ? -1 : lp.add_columns(pre + "Qh_" + tag, T, -lp::kInf, lp::kInf));
    }

    v.v_lo_row.assign(N, -1);
    v.v_hi_row.assign(N, -1);
    for (int t = 0; t < T; ++t) {
        const std::string st = "_" + std::to_string(t);
        for (int i = 0; i < N; ++i) {
            std::vector<lp::Term> p_row, q_row;
            if (i == 0) {
                p_row.push_back({v.P0 + t, 1.0});
            } else {
                p_row.push_back({v.P_line[g.parent_line[i]] + t, 1.0});
                q_row.push_back({v.Q_line[g.parent_line[i]] + t, 1.0});
            }
            for (int k : g.child_lines[i]) {
                p_row.push_back({v.P_line[k] + t, -1.0});
                q_row.push_back({v.Q_line[k] + t, -1.0});
            }
            for (int a : at_node[i]) {
                p_row.push_back({v.P_h[a] + t, -1.0});
                if (i != 0) q_row.push_back({v.Q_h[a] + t, -1.0});
            }
            lp.add_row(pre + "balP_" + std::to_string(i) + st, std::move(p_row), lp::Sense::Equal,
                       g.p_fix[i](t));
            if (i != 0)
                lp.add_row(pre + "balQ_" + std::to_string(i) + st, std::move(q_row), lp::Sense::Equal,
                           g.q_fix[i](t));
        }
        for (int k = 0; k < L; ++k) {
            const Line& l = g.lines[k];
            lp.add_row(pre + "drop_" + std::to_string(l.from) + "_" + std::to_string(l.to) + st,
                       {{v.V[l.from] + t, 1.0},
                        {v.V[l.to] + t, -1.0},
                        {v.P_line[k] + t, -2.0 * l.r_pu / g.s_base_kva},
                        {v.Q_line[k] + t, -2.0 * l.x_pu / g.s_base_kva}},
                       lp::Sense::Equal, 0.0);
        }
        for (int a = 0; a < static_cast<int>(att.size()); ++a)
            if (v.Q_h[a] >= 0)
                lp.add_row(pre + "pf_" + std::to_string(a) + st,
                           {{v.Q_h[a] + t, 1.0}, {v.P_h[a] + t, -att[a].tan_gamma}}, lp::Sense::Equal, 0.0);
    }
    if (!opt.ignore_voltage) {
        for (int i = 1; i < N; ++i) {
            v.v_lo_row[i] = lp.num_rows();
            for (int t = 0; t < T; ++t)
                lp.add_row(pre + "vlo_" + std::to_string(i) + "_" + std::to_string(t), {{v.V[i] + t, 1.0}},
                           lp::Sense::GreaterEqual, g.v_lo[i]);
        }
        for (int i = 1; i < N; ++i) {
            v.v_hi_row[i] = lp.num_rows();
            for (int t = 0; t < T; ++t)
                lp.add_row(pre + "vhi_" + std::to_string(i) + "_" + std::to_string(t), {{v.V[i] + t, 1.0}},
                           lp::Sense::LessEqual, g.v_hi[i]);
        }
    }
    v.end_row = lp.num_rows();
    return v;
}

}  // namespace dsoflex

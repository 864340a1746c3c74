#include "amdkd/policy.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <stdexcept>

namespace amdkd {

void ArchSpec::validate() const {
    if (embed_dim <= 0 || n_heads <= 0 || n_layers <= 0) throw std::invalid_argument("ArchSpec: dims must be positive");
    if (embed_dim % n_heads != 0) throw std::invalid_argument("ArchSpec: embed_dim must be divisible by n_heads");
}

std::vector<ArchSpec::TensorShape> ArchSpec::shapes() const {
    const int d = embed_dim;
    const int f = ff();
    std::vector<TensorShape> s;
    s.push_back({"embed_node.W", 2, d});
    s.push_back({"embed_node.b", 1, d});
    s.push_back({"embed_cust.W", 3, d});
    s.push_back({"embed_cust.b", 1, d});
    s.push_back({"embed_depot.W", 2, d});
    s.push_back({"embed_depot.b", 1, d});
    for (int l = 0; l < n_layers; ++l) {
        const std::string p = "enc" + std::to_string(l) + ".";
        s.push_back({p + "attn.Wq", d, d});
        s.push_back({p + "attn.Wk", d, d});
        s.push_back({p + "attn.Wv", d, d});
        s.push_back({p + "attn.Wo", d, d});
        s.push_back({p + "norm1.g", 1, d});
        s.push_back({p + "norm1.b", 1, d});
        s.push_back({p + "ff.W1", d, f});
        s.push_back({p + "ff.b1", 1, f});
        s.push_back({p + "ff.W2", f, d});
        s.push_back({p + "ff.b2", 1, d});
        s.push_back({p + "norm2.g", 1, d});
        s.push_back({p + "norm2.b", 1, d});
    }
    s.push_back({"dec.first", 1, d});
    s.push_back({"dec.Wctx_tsp", 2 * d, d});
    s.push_back({"dec.Wctx_cvrp", 2 * d + 1, d});
    s.push_back({"dec.Wq", d, d});
    s.push_back({"dec.Wk", d, d});
    return s;
}

namespace {

bool tensor_used(const std::string& name, ProblemKind kind) {
    if (kind == ProblemKind::TSP) {
        return name != "embed_cust.W" && name != "embed_cust.b" && name != "embed_depot.W" &&
               name != "embed_depot.b" && name != "dec.Wctx_cvrp";
    }
    return name != "embed_node.W" && name != "embed_node.b" && name != "dec.Wctx_tsp" &&
           name != "dec.first";
}

bool input_tensor(const std::string& name) { return name.rfind("embed_", 0) == 0; }

}  // namespace

long ArchSpec::param_count() const {
    long c = 0;
    for (const auto& s : shapes()) {
        if (tensor_used(s.name, kind)) c += static_cast<long>(s.rows) * s.cols;
    }
    return c;
}

long ArchSpec::param_count_excluding_input() const {
    long c = 0;
    for (const auto& s : shapes()) {
        if (tensor_used(s.name, kind) && !input_tensor(s.name)) c += static_cast<long>(s.rows) * s.cols;
    }
    return c;
}

PolicyParams PolicyParams::init(const ArchSpec& arch, RngStream& rng) {
    arch.validate();
    PolicyParams p;
    p.arch = arch;
    for (const auto& s : arch.shapes()) {
        Mat t(s.rows, s.cols);
        if (s.name.find("norm") != std::string::npos) {
            t.setConstant(s.name.back() == 'g' ? 1.0 : 0.0);
        } else {
            const double bound = 1.0 / std::sqrt(static_cast<double>(s.rows));
            for (Eigen::Index i = 0; i < t.rows(); ++i) {
                for (Eigen::Index j = 0; j < t.cols(); ++j) t(i, j) = rng.uniform(-bound, bound);
            }
        }
        p.tensors.emplace(s.name, std::move(t));
    }
    return p;
}

bool PolicyParams::finite() const {
    for (const auto& [name, t] : tensors) {
        (void)name;
        if (!t.allFinite()) return false;
    }
    return true;
}

TapedPolicy::TapedPolicy(const Instance& inst, const PolicyParams& params)
    : inst_(inst), params_(params) {
    if (inst.size() < 2) throw std::invalid_argument("policy: instance needs >= 2 nodes");
    if (!params.finite()) throw std::runtime_error("policy: non-finite parameter tensor");
    if (inst.kind != params.arch.kind) throw std::invalid_argument("policy: instance/arch problem kind mismatch");
    if (inst.kind == ProblemKind::CVRP && inst.depot != 0) {
        throw std::invalid_argument("policy: CVRP instances must have depot index 0");
    }
    for (const auto& [name, t] : params.tensors) {
        if (tensor_used(name, params.arch.kind)) leaves_.emplace(name, tape_.leaf(t));
    }
    build_encoder();
}

int TapedPolicy::instance_norm(int x, const std::string& prefix) {
    // Per-instance statistics across nodes, per feature dimension.
    const int mu = tape_.col_mean(x);
    const int xc = tape_.add_row(x, tape_.scale(mu, -1.0));
    const int var = tape_.col_mean(tape_.hadamard(xc, xc));
    const int inv = tape_.rsqrt_eps(var, kNormEps);
    const int normed = tape_.mul_row(xc, inv);
    return tape_.add_row(tape_.mul_row(normed, leaves_.at(prefix + ".g")), leaves_.at(prefix + ".b"));
}

void TapedPolicy::build_encoder() {
    const int n = inst_.size();
    const ArchSpec& a = params_.arch;
    int h;
    if (inst_.kind == ProblemKind::TSP) {
        Mat x(n, 2);
        for (int i = 0; i < n; ++i) {
            x(i, 0) = inst_.coords[static_cast<size_t>(i)].x;
            x(i, 1) = inst_.coords[static_cast<size_t>(i)].y;
        }
        h = tape_.add_row(tape_.matmul(tape_.leaf(x), leaves_.at("embed_node.W")), leaves_.at("embed_node.b"));
    } else {
        Mat xd(1, 2);
        xd(0, 0) = inst_.coords[0].x;
        xd(0, 1) = inst_.coords[0].y;
        Mat xc(n - 1, 3);
        for (int i = 1; i < n; ++i) {
            xc(i - 1, 0) = inst_.coords[static_cast<size_t>(i)].x;
            xc(i - 1, 1) = inst_.coords[static_cast<size_t>(i)].y;
            xc(i - 1, 2) = static_cast<double>(inst_.demands[static_cast<size_t>(i)]) / inst_.capacity;
        }
        const int depot_h = tape_.add_row(tape_.matmul(tape_.leaf(xd), leaves_.at("embed_depot.W")),
                                          leaves_.at("embed_depot.b"));
        const int cust_h = tape_.add_row(tape_.matmul(tape_.leaf(xc), leaves_.at("embed_cust.W")),
                                         leaves_.at("embed_cust.b"));
        h = tape_.concat_rows(depot_h, cust_h);
    }
    const int dk = a.head_dim();
    for (int l = 0; l < a.n_layers; ++l) {
        const std::string p = "enc" + std::to_string(l) + ".";
        const int q = tape_.matmul(h, leaves_.at(p + "attn.Wq"));
        const int k = tape_.matmul(h, leaves_.at(p + "attn.Wk"));
        const int v = tape_.matmul(h, leaves_.at(p + "attn.Wv"));
        int heads = -1;
        for (int hd = 0; hd < a.n_heads; ++hd) {
            const int qh = tape_.col_slice(q, hd * dk, dk);
            const int kh = tape_.col_slice(k, hd * dk, dk);
            const int vh = tape_.col_slice(v, hd * dk, dk);
            const int att = tape_.row_softmax(tape_.scale(tape_.matmul_nt(qh, kh), 1.0 / std::sqrt(dk)));
            const int oh = tape_.matmul(att, vh);
            heads = heads < 0 ? oh : tape_.concat_cols(heads, oh);
        }
        const int mha = tape_.matmul(heads, leaves_.at(p + "attn.Wo"));
        const int n1 = instance_norm(tape_.add(h, mha), p + "norm1");
        const int ff1 = tape_.relu(tape_.add_row(tape_.matmul(n1, leaves_.at(p + "ff.W1")), leaves_.at(p + "ff.b1")));
        const int ff2 = tape_.add_row(tape_.matmul(ff1, leaves_.at(p + "ff.W2")), leaves_.at(p + "ff.b2"));
        h = instance_norm(tape_.add(n1, ff2), p + "norm2");
    }
    h_ = h;
    hmean_ = tape_.col_mean(h_);
    kptr_ = tape_.matmul(h_, leaves_.at("dec.Wk"));
}

int TapedPolicy::step_logp_row(const ConstructionState& state) {
    const ArchSpec& a = params_.arch;
    int cur;
    if (inst_.kind == ProblemKind::TSP) {
        cur = state.current < 0 ? leaves_.at("dec.first") : tape_.row(h_, state.current);
    } else {
        cur = tape_.row(h_, state.current);
    }
    int ctx = tape_.concat_cols(cur, hmean_);
    int wctx;
    if (inst_.kind == ProblemKind::CVRP) {
        ctx = tape_.concat_cols(ctx, tape_.leaf(Mat::Constant(1, 1, static_cast<double>(state.remaining) / inst_.capacity)));
        wctx = leaves_.at("dec.Wctx_cvrp");
    } else {
        wctx = leaves_.at("dec.Wctx_tsp");
    }
    const int hc = tape_.matmul(ctx, wctx);
    const int q = tape_.matmul(hc, leaves_.at("dec.Wq"));
    const int u = tape_.scale(tape_.matmul_nt(q, kptr_), 1.0 / std::sqrt(static_cast<double>(a.embed_dim)));
    const int clipped = tape_.scale(tape_.tanh_(u), kLogitClip);
    const auto mask = feasible_mask(state, inst_);
    const int row = tape_.masked_log_softmax(clipped, mask);
    if (!tape_.val(row).allFinite()) {
        // masked entries carry the sentinel, feasible entries must be finite
        for (Eigen::Index j = 0; j < tape_.val(row).cols(); ++j) {
            if (mask[static_cast<size_t>(j)] && !std::isfinite(tape_.val(row)(0, j))) {
                throw std::runtime_error("policy: non-finite log-probability at decoder output");
            }
        }
    }
    return row;
}

TapedPolicy::Replay TapedPolicy::replay(const Tour& tour) {
    if (auto v = validate_tour(inst_, tour)) throw std::invalid_argument("replay: infeasible tour: " + v->what);
    Replay r;
    ConstructionState state = initial_state(inst_);
    for (int action : tour.sequence) {
        if (state.done) break;
        const int row = step_logp_row(state);
        r.logp_rows.push_back(row);
        const int picked = tape_.entry(row, 0, action);
        r.total_node = r.total_node < 0 ? picked : tape_.add(r.total_node, picked);
        r.step_logp.push_back(tape_.val(picked)(0, 0));
        env_step(state, action, inst_);
    }
    if (!state.done && inst_.kind == ProblemKind::CVRP) {
        // stored CVRP tours may omit the final depot return
        const int row = step_logp_row(state);
        r.logp_rows.push_back(row);
        const int picked = tape_.entry(row, 0, inst_.depot);
        r.total_node = tape_.add(r.total_node, picked);
        r.step_logp.push_back(tape_.val(picked)(0, 0));
        env_step(state, inst_.depot, inst_);
    }
    for (double lp : r.step_logp) r.total_logp += lp;
    return r;
}

Mat TapedPolicy::grad(const std::string& tensor) const {
    auto it = leaves_.find(tensor);
    if (it == leaves_.end()) {
        const Mat& t = params_.tensors.at(tensor);
        return Mat::Zero(t.rows(), t.cols());
    }
    return tape_.grad(it->second);
}

Mat encode(const Instance& inst, const PolicyParams& params) {
    TapedPolicy tp(inst, params);
    return tp.tape().val(tp.embeddings_node());
}

namespace {

Eigen::VectorXd dist_from_logp(const Mat& row) {
    Eigen::VectorXd p(row.cols());
    for (Eigen::Index j = 0; j < row.cols(); ++j) {
        p(j) = row(0, j) <= ad::kNegInf ? 0.0 : std::exp(row(0, j));
    }
    return p;
}

int pick_greedy(const Mat& row) {
    int best = 0;
    for (Eigen::Index j = 1; j < row.cols(); ++j) {
        if (row(0, j) > row(0, best)) best = static_cast<int>(j);
    }
    return best;
}

int pick_sample(const Mat& row, const std::vector<char>& mask, RngStream& rng) {
    const double u = rng.uniform();
    double acc = 0.0;
    int last_feasible = -1;
    for (Eigen::Index j = 0; j < row.cols(); ++j) {
        if (!mask[static_cast<size_t>(j)]) continue;
        last_feasible = static_cast<int>(j);
        acc += std::exp(row(0, j));
        if (u < acc) return static_cast<int>(j);
    }
    return last_feasible;  // guard against rounding at acc ~ 1
}

RolloutTrace run_rollout(TapedPolicy& tp, DecodeMode mode, RngStream* rng, bool keep_dists,
                         int forced_first) {
    const Instance& inst = tp.instance();
    RolloutTrace trace;
    ConstructionState state = initial_state(inst);
    bool first = true;
    while (!state.done) {
        const int row = tp.step_logp_row(state);
        const Mat& logp = tp.tape().val(row);
        int action;
        if (first && forced_first >= 0) {
            action = forced_first;
        } else if (mode == DecodeMode::Greedy) {
            action = pick_greedy(logp);
        } else {
            if (!rng) throw std::invalid_argument("sampling rollout requires an rng");
            action = pick_sample(logp, feasible_mask(state, inst), *rng);
        }
        trace.step_logp.push_back(logp(0, action));
        if (keep_dists) trace.step_dist.push_back(dist_from_logp(logp));
        env_step(state, action, inst);
        first = false;
    }
    trace.tour = finish_tour(inst, state);
    for (double lp : trace.step_logp) trace.total_logp += lp;
    return trace;
}

}  // namespace

Eigen::VectorXd decode_step(const ConstructionState& state, const Instance& inst,
                            const PolicyParams& params) {
    TapedPolicy tp(inst, params);
    return dist_from_logp(tp.tape().val(tp.step_logp_row(state)));
}

RolloutTrace rollout(const Instance& inst, const PolicyParams& params, DecodeMode mode,
                     RngStream* rng, bool keep_dists) {
    TapedPolicy tp(inst, params);
    return run_rollout(tp, mode, rng, keep_dists, -1);
}

std::vector<RolloutTrace> rollout_multistart(const Instance& inst, const PolicyParams& params,
                                             int n_starts, DecodeMode mode, RngStream* rng,
                                             bool keep_dists) {
    TapedPolicy tp(inst, params);
    const auto mask0 = feasible_mask(initial_state(inst), inst);
    std::vector<int> firsts;
    for (int j = 0; j < inst.size() && static_cast<int>(firsts.size()) < n_starts; ++j) {
        if (mask0[static_cast<size_t>(j)]) firsts.push_back(j);
    }
    std::vector<RolloutTrace> traces;
    traces.reserve(firsts.size());
    for (int f : firsts) traces.push_back(run_rollout(tp, mode, rng, keep_dists, f));
    return traces;
}

ScoreResult score_tour(const Instance& inst, const Tour& tour, const PolicyParams& params) {
    TapedPolicy tp(inst, params);
    const auto replay = tp.replay(tour);
    ScoreResult res;
    res.step_logp = replay.step_logp;
    res.total_logp = replay.total_logp;
    for (int row : replay.logp_rows) res.step_dist.push_back(dist_from_logp(tp.tape().val(row)));
    return res;
}

GradMap grad_log_prob(const Instance& inst, const Tour& tour, const PolicyParams& params) {
    TapedPolicy tp(inst, params);
    const auto replay = tp.replay(tour);
    tp.backward(replay.total_node);
    GradMap grads;
    for (const auto& [name, t] : params.tensors) {
        (void)t;
        grads.emplace(name, tp.grad(name));
    }
    return grads;
}

double greedy_length(const Instance& inst, const PolicyParams& params) {
    return rollout(inst, params, DecodeMode::Greedy, nullptr).tour.length;
}

double greedy_aug8_length(const Instance& inst, const PolicyParams& params) {
    double best = std::numeric_limits<double>::infinity();
    for (const auto& a : augment8(inst)) {
        best = std::min(best, greedy_length(a, params));
    }
    return best;
}

void accumulate(GradMap& into, const GradMap& add, double scale) {
    for (const auto& [name, g] : add) {
        auto it = into.find(name);
        if (it == into.end()) {
            into.emplace(name, scale * g);
        } else {
            it->second += scale * g;
        }
    }
}

GradMap zero_grads(const ArchSpec& arch) {
    GradMap g;
    for (const auto& s : arch.shapes()) g.emplace(s.name, Mat::Zero(s.rows, s.cols));
    return g;
}

void AdamState::update(PolicyParams& params, const GradMap& grads, double lr) {
    if (m.empty()) {
        for (const auto& [name, tensor] : params.tensors) {
            m.emplace(name, Mat::Zero(tensor.rows(), tensor.cols()));
            v.emplace(name, Mat::Zero(tensor.rows(), tensor.cols()));
        }
    }
    double sq = 0.0;
    for (const auto& [name, g] : grads) {
        (void)name;
        sq += g.squaredNorm();
    }
    const double norm = std::sqrt(sq);
    const double clip = norm > 1.0 ? 1.0 / norm : 1.0;
    ++t;
    const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(t));
    const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(t));
    for (auto& [name, tensor] : params.tensors) {
        auto git = grads.find(name);
        if (git == grads.end()) continue;
        const Mat g = clip * git->second;
        Mat& mm = m.at(name);
        Mat& vv = v.at(name);
        mm = beta1 * mm + (1.0 - beta1) * g;
        vv = beta2 * vv + (1.0 - beta2) * g.cwiseProduct(g);
        const Mat mhat = mm / bc1;
        const Mat vhat = vv / bc2;
        tensor -= lr * (mhat.array() / (vhat.array().sqrt() + eps)).matrix();
    }
}

// ---------------------------------------------------------------------------
// Checkpoint IO

namespace {

constexpr char kMagic[8] = {'A', 'M', 'D', 'K', 'D', 'C', 'K', '1'};

void write_u32(std::ostream& os, uint32_t v) {
    unsigned char b[4];
    for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
    os.write(reinterpret_cast<const char*>(b), 4);
}

uint32_t read_u32(std::istream& is) {
    unsigned char b[4];
    is.read(reinterpret_cast<char*>(b), 4);
    uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(b[i]) << (8 * i);
    return v;
}

void write_i64(std::ostream& os, int64_t v) {
    write_u32(os, static_cast<uint32_t>(static_cast<uint64_t>(v) & 0xffffffffULL));
    write_u32(os, static_cast<uint32_t>(static_cast<uint64_t>(v) >> 32));
}

int64_t read_i64(std::istream& is) {
    const uint64_t lo = read_u32(is);
    const uint64_t hi = read_u32(is);
    return static_cast<int64_t>(lo | (hi << 32));
}

void write_mat(std::ostream& os, const Mat& t) {
    write_u32(os, static_cast<uint32_t>(t.rows()));
    write_u32(os, static_cast<uint32_t>(t.cols()));
    for (Eigen::Index i = 0; i < t.rows(); ++i) {
        for (Eigen::Index j = 0; j < t.cols(); ++j) {
            uint64_t bits;
            const double d = t(i, j);
            std::memcpy(&bits, &d, 8);
            unsigned char b[8];
            for (int k = 0; k < 8; ++k) b[k] = static_cast<unsigned char>((bits >> (8 * k)) & 0xff);
            os.write(reinterpret_cast<const char*>(b), 8);
        }
    }
}

Mat read_mat(std::istream& is) {
    const uint32_t rows = read_u32(is);
    const uint32_t cols = read_u32(is);
    Mat t(rows, cols);
    for (uint32_t i = 0; i < rows; ++i) {
        for (uint32_t j = 0; j < cols; ++j) {
            unsigned char b[8];
            is.read(reinterpret_cast<char*>(b), 8);
            uint64_t bits = 0;
            for (int k = 0; k < 8; ++k) bits |= static_cast<uint64_t>(b[k]) << (8 * k);
            double d;
            std::memcpy(&d, &bits, 8);
            t(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = d;
        }
    }
    return t;
}

void write_string(std::ostream& os, const std::string& s) {
    write_u32(os, static_cast<uint32_t>(s.size()));
    os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string read_string(std::istream& is) {
    const uint32_t len = read_u32(is);
    std::string s(len, '\0');
    is.read(s.data(), len);
    return s;
}

}  // namespace

void save_checkpoint(const std::string& path, const PolicyParams& params, const AdamState* moments) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot open checkpoint for writing: " + path);
    os.write(kMagic, 8);
    write_u32(os, static_cast<uint32_t>(params.arch.embed_dim));
    write_u32(os, static_cast<uint32_t>(params.arch.n_heads));
    write_u32(os, static_cast<uint32_t>(params.arch.n_layers));
    write_u32(os, static_cast<uint32_t>(params.arch.ff_dim));
    write_u32(os, params.arch.kind == ProblemKind::TSP ? 0u : 1u);
    write_u32(os, static_cast<uint32_t>(params.tensors.size()));
    for (const auto& [name, t] : params.tensors) {
        write_string(os, name);
        write_mat(os, t);
    }
    write_u32(os, moments ? 1u : 0u);
    if (moments) {
        write_i64(os, moments->t);
        for (const auto& [name, t] : moments->m) {
            write_string(os, name);
            write_mat(os, t);
        }
        for (const auto& [name, t] : moments->v) {
            write_string(os, name);
            write_mat(os, t);
        }
    }
}

PolicyParams load_checkpoint(const std::string& path, AdamState* moments) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot open checkpoint: " + path);
    char magic[8];
    is.read(magic, 8);
    if (std::memcmp(magic, kMagic, 8) != 0) throw std::runtime_error("bad checkpoint magic: " + path);
    PolicyParams p;
    p.arch.embed_dim = static_cast<int>(read_u32(is));
    p.arch.n_heads = static_cast<int>(read_u32(is));
    p.arch.n_layers = static_cast<int>(read_u32(is));
    p.arch.ff_dim = static_cast<int>(read_u32(is));
    p.arch.kind = read_u32(is) == 0 ? ProblemKind::TSP : ProblemKind::CVRP;
    p.arch.validate();
    const uint32_t count = read_u32(is);
    for (uint32_t i = 0; i < count; ++i) {
        std::string name = read_string(is);
        p.tensors.emplace(std::move(name), read_mat(is));
    }
    // Shapes must match the declared architecture.
    for (const auto& s : p.arch.shapes()) {
        auto it = p.tensors.find(s.name);
        if (it == p.tensors.end()) throw std::runtime_error("checkpoint missing tensor " + s.name);
        if (it->second.rows() != s.rows || it->second.cols() != s.cols) {
            throw std::runtime_error("checkpoint tensor shape mismatch for " + s.name);
        }
    }
    const uint32_t has_moments = read_u32(is);
    if (has_moments && moments) {
        moments->t = read_i64(is);
        for (uint32_t i = 0; i < count; ++i) {
            std::string name = read_string(is);
            moments->m.emplace(std::move(name), read_mat(is));
        }
        for (uint32_t i = 0; i < count; ++i) {
            std::string name = read_string(is);
            moments->v.emplace(std::move(name), read_mat(is));
        }
    }
    if (!is) throw std::runtime_error("truncated checkpoint: " + path);
    return p;
}

}  // namespace amdkd

#include "resetfree/primal.hpp"

#include <algorithm>
#include <unordered_map>

#include <json.hpp>

namespace resetfree {

namespace {

double clip(double x, double lo, double hi) { return std::min(std::max(x, lo), hi); }

} // namespace

double LearnerHyper::alpha() const {
    if (!std::isnan(alpha_override)) return alpha_override;
    return std::log(static_cast<double>(num_actions)) * static_cast<double>(num_episodes) /
           (2.0 * (1.0 + dual_radius + horizon));
}

double LearnerHyper::beta(int feature_dim) const {
    const double inner = 4.0 * std::log(static_cast<double>(num_actions)) * feature_dim *
                         static_cast<double>(num_episodes) * horizon / confidence;
    return bonus_scale * bonus_constant * feature_dim * horizon * std::sqrt(std::log(inner));
}

void LearnerHyper::validate() const {
    if (horizon < 1) throw ContractViolation("LearnerHyper: horizon must be >= 1");
    if (num_actions < 2) throw ContractViolation("LearnerHyper: at least two actions required");
    if (num_episodes < 1) throw ContractViolation("LearnerHyper: num_episodes must be >= 1");
    if (!(dual_radius > 0.0)) throw ContractViolation("LearnerHyper: dual_radius must be positive");
    if (!(confidence > 0.0 && confidence < 1.0)) throw ContractViolation("LearnerHyper: confidence in (0,1)");
    if (!(ridge > 0.0)) throw ContractViolation("LearnerHyper: ridge must be positive");
    if (!(bonus_constant >= 0.0) || !(bonus_scale >= 0.0))
        throw ContractViolation("LearnerHyper: bonus factors must be nonnegative");
    if (!std::isnan(alpha_override) && !(alpha_override >= 0.0))
        throw ContractViolation("LearnerHyper: alpha_override must be nonnegative");
}

std::vector<double> softmax(const std::vector<double>& scores, double alpha) {
    if (scores.empty()) throw ContractViolation("softmax: empty score vector");
    double best = scores[0];
    for (double s : scores) {
        if (!std::isfinite(s)) throw NumericError("softmax: non-finite score");
        best = std::max(best, s);
    }
    std::vector<double> p(scores.size());
    double total = 0.0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        p[i] = std::exp(alpha * (scores[i] - best));
        total += p[i];
    }
    for (double& x : p) x /= total;
    double check = 0.0;
    for (double x : p) check += x;
    if (std::fabs(check - 1.0) > 1e-12) throw NumericError("softmax: row does not normalise");
    return p;
}

struct Learner::Generation {
    std::vector<Eigen::LLT<Eigen::MatrixXd>> llt; // per layer, factor of gram + ridge I
    std::vector<Eigen::VectorXd> w_r;
    std::vector<Eigen::VectorXd> w_c;
};

struct Learner::TabularTables {
    int n = 0;
    int m = 0;
    int H = 0;

    std::vector<double> count; // [h0][bucket]
    std::vector<double> sum_r; // accumulated observed rewards per bucket
    std::vector<double> sum_c;
    std::vector<double> succ;  // [h0][bucket][s_aug] successor counts

    std::vector<double> w_r;   // [h0][bucket] regression weights, current generation
    std::vector<double> w_c;
    std::vector<double> q_r;   // [h0][s_aug][a] current generation, clipped
    std::vector<double> q_c;
    std::vector<double> v_r;   // [h0 in 0..H][s_aug]; layer H is the zero tail
    std::vector<double> v_c;

    std::size_t bi(int h0, int b) const { return static_cast<std::size_t>(h0) * (n * m) + b; }
    std::size_t si(int h0, int b, int s_aug) const {
        return (static_cast<std::size_t>(h0) * (n * m) + b) * (n + 1) + s_aug;
    }
    std::size_t qi(int h0, int s_aug, int a) const {
        return (static_cast<std::size_t>(h0) * (n + 1) + s_aug) * m + a;
    }
    std::size_t vi(int h0, int s_aug) const { return static_cast<std::size_t>(h0) * (n + 1) + s_aug; }
    int aug(const EnvState& st) const { return st.absorbing() ? n : st.id; }
};

Learner::~Learner() = default;

Learner::Learner(std::shared_ptr<const PrimalFeatures> features, const LearnerHyper& hyper)
    : features_(std::move(features)), hyper_(hyper) {
    if (!features_) throw ContractViolation("Learner: null feature map");
    hyper_.validate();
    dim_ = features_->dim();
    if (dim_ <= 0) throw ContractViolation("Learner: feature dim must be positive");
    alpha_ = hyper_.alpha();
    beta_ = hyper_.beta(dim_);
    const int H = hyper_.horizon;

    const auto shape = features_->tabular_shape();
    tabular_ = shape.has_value();
    if (tabular_) {
        if (shape->num_actions != hyper_.num_actions)
            throw ContractViolation("Learner: tabular feature action count disagrees with hyper");
        tab_ = std::make_unique<TabularTables>();
        tab_->n = shape->num_states;
        tab_->m = shape->num_actions;
        tab_->H = H;
        const std::size_t nb = static_cast<std::size_t>(H) * tab_->n * tab_->m;
        tab_->count.assign(nb, 0.0);
        tab_->sum_r.assign(nb, 0.0);
        tab_->sum_c.assign(nb, 0.0);
        tab_->succ.assign(nb * (tab_->n + 1), 0.0);
        tab_->w_r.assign(nb, 0.0);
        tab_->w_c.assign(nb, 0.0);
        tab_->q_r.assign(static_cast<std::size_t>(H) * (tab_->n + 1) * tab_->m, 0.0);
        tab_->q_c.assign(tab_->q_r.size(), 0.0);
        tab_->v_r.assign(static_cast<std::size_t>(H + 1) * (tab_->n + 1), 0.0);
        tab_->v_c.assign(tab_->v_r.size(), 0.0);
        // Empty-data estimates: pure bonus, clipped.
        const double bonus = beta_ / std::sqrt(hyper_.ridge);
        for (int h0 = 0; h0 < H; ++h0) {
            const double qr = clip(bonus, 0.0, static_cast<double>(H - h0));
            for (int s = 0; s < tab_->n; ++s) {
                for (int a = 0; a < tab_->m; ++a) tab_->q_r[tab_->qi(h0, s, a)] = qr;
                tab_->v_r[tab_->vi(h0, s)] = qr; // constant rows average to themselves
            }
        }
    } else {
        gram_raw_.assign(H, Eigen::MatrixXd::Zero(dim_, dim_));
        auto init_gen = std::make_unique<Generation>();
        Eigen::LLT<Eigen::MatrixXd> base(
            (hyper_.ridge * Eigen::MatrixXd::Identity(dim_, dim_)).eval());
        if (base.info() != Eigen::Success) throw NumericError("Learner: initial factorisation failed");
        init_gen->llt.assign(H, base);
        init_gen->w_r.assign(H, Eigen::VectorXd::Zero(dim_));
        init_gen->w_c.assign(H, Eigen::VectorXd::Zero(dim_));
        prev_ = std::make_unique<Generation>(*init_gen);
        cur_ = std::move(init_gen);
    }
}

double Learner::q_eval(const Generation& gen, const EnvState& state, int action, bool cost) const {
    const int h = state.step;
    const int h0 = h - 1;
    Eigen::VectorXd phi(dim_);
    features_->evaluate(state, action, phi);
    if (phi.squaredNorm() == 0.0) return 0.0;
    const double dot = cost ? gen.w_c[h0].dot(phi) : gen.w_r[h0].dot(phi);
    const double quad = std::max(phi.dot(gen.llt[h0].solve(phi)), 0.0);
    const double bonus = beta_ * std::sqrt(quad);
    if (cost) return clip(dot - bonus, 0.0, 1.0);
    return clip(dot + bonus, 0.0, static_cast<double>(hyper_.horizon - h + 1));
}

double Learner::q_reward(const EnvState& state, int action) const {
    if (state.step < 1 || state.step > hyper_.horizon)
        throw ContractViolation("q_reward: step outside horizon");
    if (action < 0 || action >= hyper_.num_actions) throw ContractViolation("q_reward: action out of range");
    if (tabular_) return tab_->q_r[tab_->qi(state.step - 1, tab_->aug(state), action)];
    return q_eval(*cur_, state, action, false);
}

double Learner::q_cost(const EnvState& state, int action) const {
    if (state.step < 1 || state.step > hyper_.horizon)
        throw ContractViolation("q_cost: step outside horizon");
    if (action < 0 || action >= hyper_.num_actions) throw ContractViolation("q_cost: action out of range");
    if (tabular_) return tab_->q_c[tab_->qi(state.step - 1, tab_->aug(state), action)];
    return q_eval(*cur_, state, action, true);
}

std::vector<double> Learner::policy_distribution(const EnvState& state, double lambda_at_start) const {
    if (!std::isfinite(lambda_at_start) || lambda_at_start < 0.0)
        throw ContractViolation("policy_distribution: multiplier must be finite and nonnegative");
    std::vector<double> scores(hyper_.num_actions);
    for (int a = 0; a < hyper_.num_actions; ++a)
        scores[a] = q_reward(state, a) - lambda_at_start * q_cost(state, a);
    return softmax(scores, alpha_);
}

Learner::Values Learner::value_estimates(const EnvState& state) const {
    if (state.step < 1 || state.step > hyper_.horizon)
        throw ContractViolation("value_estimates: step outside horizon");
    Values out;
    if (tabular_) {
        out.v_reward = tab_->v_r[tab_->vi(state.step - 1, tab_->aug(state))];
        out.v_cost = tab_->v_c[tab_->vi(state.step - 1, tab_->aug(state))];
        return out;
    }
    // Weights of the previous episode's policy over current-generation values.
    std::vector<double> scores(hyper_.num_actions);
    for (int a = 0; a < hyper_.num_actions; ++a)
        scores[a] = q_eval(*prev_, state, a, false) - lambda_prev_ * q_eval(*prev_, state, a, true);
    const std::vector<double> w = softmax(scores, alpha_);
    for (int a = 0; a < hyper_.num_actions; ++a) {
        out.v_reward += w[a] * q_eval(*cur_, state, a, false);
        out.v_cost += w[a] * q_eval(*cur_, state, a, true);
    }
    return out;
}

void Learner::end_of_episode_update(const Trajectory& trajectory) {
    const int H = hyper_.horizon;
    if (static_cast<int>(trajectory.steps.size()) != H)
        throw ContractViolation("end_of_episode_update: trajectory length must equal horizon");
    if (!std::isfinite(trajectory.lambda_at_start) || trajectory.lambda_at_start < 0.0)
        throw ContractViolation("end_of_episode_update: bad episode multiplier");
    for (int i = 0; i < H; ++i) {
        const auto& st = trajectory.steps[i];
        if (st.state.step != i + 1 || st.next.step != i + 2)
            throw ContractViolation("end_of_episode_update: step indices out of order");
        if (st.action < 0 || st.action >= hyper_.num_actions)
            throw ContractViolation("end_of_episode_update: action out of range");
    }
    if (!(trajectory.initial == trajectory.steps.front().state))
        throw ContractViolation("end_of_episode_update: initial state mismatch");

    const double lam = trajectory.lambda_at_start;

    if (tabular_) {
        TabularTables& t = *tab_;
        for (int i = 0; i < H; ++i) {
            const auto& st = trajectory.steps[i];
            const int b = features_->bucket_index(st.state, st.action);
            if (b < 0) continue; // absorbing: zero feature, no regression mass
            if (!st.next.absorbing() && (st.next.id < 0 || st.next.id >= t.n))
                throw ContractViolation("end_of_episode_update: successor id out of range");
            t.count[t.bi(i, b)] += 1.0;
            t.sum_r[t.bi(i, b)] += st.reward;
            t.sum_c[t.bi(i, b)] += st.cost;
            t.succ[t.si(i, b, t.aug(st.next))] += 1.0;
        }

        std::vector<double> q_r_new(t.q_r.size(), 0.0), q_c_new(t.q_c.size(), 0.0);
        std::vector<double> v_r_new(t.v_r.size(), 0.0), v_c_new(t.v_c.size(), 0.0);
        std::vector<double> w_r_new(t.w_r.size(), 0.0), w_c_new(t.w_c.size(), 0.0);
        std::vector<double> scores(t.m);
        for (int h0 = H - 1; h0 >= 0; --h0) {
            for (int s = 0; s < t.n; ++s) {
                for (int a = 0; a < t.m; ++a) {
                    const int b = s * t.m + a;
                    const double denom = t.count[t.bi(h0, b)] + hyper_.ridge;
                    double num_r = t.sum_r[t.bi(h0, b)];
                    double num_c = t.sum_c[t.bi(h0, b)];
                    for (int s2 = 0; s2 <= t.n; ++s2) {
                        const double c = t.succ[t.si(h0, b, s2)];
                        if (c > 0.0) {
                            num_r += c * v_r_new[t.vi(h0 + 1, s2)];
                            num_c += c * v_c_new[t.vi(h0 + 1, s2)];
                        }
                    }
                    const double wr = num_r / denom;
                    const double wc = num_c / denom;
                    const double bonus = beta_ / std::sqrt(denom);
                    w_r_new[t.bi(h0, b)] = wr;
                    w_c_new[t.bi(h0, b)] = wc;
                    q_r_new[t.qi(h0, s, a)] = clip(wr + bonus, 0.0, static_cast<double>(H - h0));
                    q_c_new[t.qi(h0, s, a)] = clip(wc - bonus, 0.0, 1.0);
                }
            }
            // Value rows: the just-played episode's policy weights (previous
            // generation scores, episode multiplier) over the new values.
            for (int s = 0; s < t.n; ++s) {
                for (int a = 0; a < t.m; ++a)
                    scores[a] = t.q_r[t.qi(h0, s, a)] - lam * t.q_c[t.qi(h0, s, a)];
                const std::vector<double> w = softmax(scores, alpha_);
                double vr = 0.0, vc = 0.0;
                for (int a = 0; a < t.m; ++a) {
                    vr += w[a] * q_r_new[t.qi(h0, s, a)];
                    vc += w[a] * q_c_new[t.qi(h0, s, a)];
                }
                v_r_new[t.vi(h0, s)] = vr;
                v_c_new[t.vi(h0, s)] = vc;
            }
        }
        t.q_r.swap(q_r_new);
        t.q_c.swap(q_c_new);
        t.v_r.swap(v_r_new);
        t.v_c.swap(v_c_new);
        t.w_r.swap(w_r_new);
        t.w_c.swap(w_c_new);
    } else {
        history_.push_back(trajectory);
        phi_cache_.emplace_back();
        phi_cache_.back().reserve(H);
        for (int i = 0; i < H; ++i) {
            Eigen::VectorXd phi(dim_);
            features_->evaluate(trajectory.steps[i].state, trajectory.steps[i].action, phi);
            phi_cache_.back().push_back(std::move(phi));
        }

        auto gen_new = std::make_unique<Generation>();
        gen_new->llt.resize(H);
        gen_new->w_r.assign(H, Eigen::VectorXd::Zero(dim_));
        gen_new->w_c.assign(H, Eigen::VectorXd::Zero(dim_));

        for (int h0 = H - 1; h0 >= 0; --h0) {
            gram_raw_[h0].selfadjointView<Eigen::Lower>().rankUpdate(phi_cache_.back()[h0]);
            Eigen::MatrixXd lam_mat =
                Eigen::MatrixXd(gram_raw_[h0].selfadjointView<Eigen::Lower>()) +
                hyper_.ridge * Eigen::MatrixXd::Identity(dim_, dim_);
            gen_new->llt[h0] = Eigen::LLT<Eigen::MatrixXd>(lam_mat);
            if (gen_new->llt[h0].info() != Eigen::Success)
                throw NumericError("end_of_episode_update: Gram factorisation failed");

            // Next-layer values of the generation being built, memoised by
            // state id (all queried states sit at the same step).
            std::unordered_map<int, std::pair<double, double>> memo;
            auto v_new_next = [&](const EnvState& st) -> std::pair<double, double> {
                if (h0 + 1 >= H) return {0.0, 0.0};
                const auto it = memo.find(st.id);
                if (it != memo.end()) return it->second;
                std::vector<double> scores(hyper_.num_actions);
                for (int a = 0; a < hyper_.num_actions; ++a)
                    scores[a] = q_eval(*cur_, st, a, false) - lam * q_eval(*cur_, st, a, true);
                const std::vector<double> w = softmax(scores, alpha_);
                double vr = 0.0, vc = 0.0;
                for (int a = 0; a < hyper_.num_actions; ++a) {
                    vr += w[a] * q_eval(*gen_new, st, a, false);
                    vc += w[a] * q_eval(*gen_new, st, a, true);
                }
                memo.emplace(st.id, std::make_pair(vr, vc));
                return {vr, vc};
            };

            Eigen::VectorXd b_r = Eigen::VectorXd::Zero(dim_);
            Eigen::VectorXd b_c = Eigen::VectorXd::Zero(dim_);
            for (std::size_t e = 0; e < history_.size(); ++e) {
                const auto& st = history_[e].steps[h0];
                const Eigen::VectorXd& phi = phi_cache_[e][h0];
                if (phi.squaredNorm() == 0.0) continue;
                const auto [vr, vc] = v_new_next(st.next);
                b_r += phi * (st.reward + vr);
                b_c += phi * (st.cost + vc);
            }
            gen_new->w_r[h0] = gen_new->llt[h0].solve(b_r);
            gen_new->w_c[h0] = gen_new->llt[h0].solve(b_c);
        }
        prev_ = std::move(cur_);
        cur_ = std::move(gen_new);
    }
    lambda_prev_ = lam;
    ++episodes_seen_;
}

Eigen::MatrixXd Learner::gram_matrix(int h) const {
    if (h < 1 || h > hyper_.horizon) throw ContractViolation("gram_matrix: layer out of range");
    if (tabular_) {
        Eigen::VectorXd diag = Eigen::VectorXd::Constant(dim_, hyper_.ridge);
        for (int b = 0; b < tab_->n * tab_->m; ++b) diag[b] += tab_->count[tab_->bi(h - 1, b)];
        return diag.asDiagonal();
    }
    return Eigen::MatrixXd(gram_raw_[h - 1].selfadjointView<Eigen::Lower>()) +
           hyper_.ridge * Eigen::MatrixXd::Identity(dim_, dim_);
}

double Learner::gram_min_eigenvalue(int h) const {
    if (h < 1 || h > hyper_.horizon) throw ContractViolation("gram_min_eigenvalue: layer out of range");
    if (tabular_) {
        double lo = hyper_.ridge; // trailing reserved slot never accumulates
        for (int b = 0; b < tab_->n * tab_->m; ++b)
            lo = std::min(lo, hyper_.ridge + tab_->count[tab_->bi(h - 1, b)]);
        return lo;
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(gram_matrix(h), Eigen::EigenvaluesOnly);
    return es.eigenvalues().minCoeff();
}

Eigen::VectorXd Learner::weights_reward(int h) const {
    if (h < 1 || h > hyper_.horizon) throw ContractViolation("weights_reward: layer out of range");
    if (tabular_) {
        Eigen::VectorXd w = Eigen::VectorXd::Zero(dim_);
        for (int b = 0; b < tab_->n * tab_->m; ++b) w[b] = tab_->w_r[tab_->bi(h - 1, b)];
        return w;
    }
    return cur_->w_r[h - 1];
}

Eigen::VectorXd Learner::weights_cost(int h) const {
    if (h < 1 || h > hyper_.horizon) throw ContractViolation("weights_cost: layer out of range");
    if (tabular_) {
        Eigen::VectorXd w = Eigen::VectorXd::Zero(dim_);
        for (int b = 0; b < tab_->n * tab_->m; ++b) w[b] = tab_->w_c[tab_->bi(h - 1, b)];
        return w;
    }
    return cur_->w_c[h - 1];
}

std::string Learner::snapshot_json() const {
    nlohmann::json j;
    j["episodes_seen"] = episodes_seen_;
    j["feature_dim"] = dim_;
    j["tabular_backend"] = tabular_;
    j["alpha"] = alpha_;
    j["beta"] = beta_;
    j["lambda_prev"] = lambda_prev_;
    nlohmann::json hy;
    hy["horizon"] = hyper_.horizon;
    hy["num_actions"] = hyper_.num_actions;
    hy["num_episodes"] = hyper_.num_episodes;
    hy["dual_radius"] = hyper_.dual_radius;
    hy["confidence"] = hyper_.confidence;
    hy["bonus_constant"] = hyper_.bonus_constant;
    hy["bonus_scale"] = hyper_.bonus_scale;
    hy["ridge"] = hyper_.ridge;
    j["hyper"] = std::move(hy);
    nlohmann::json layers = nlohmann::json::array();
    for (int h = 1; h <= hyper_.horizon; ++h) {
        nlohmann::json layer;
        layer["h"] = h;
        const Eigen::MatrixXd gram = gram_matrix(h);
        if (tabular_) {
            std::vector<double> diag(dim_);
            for (int i = 0; i < dim_; ++i) diag[i] = gram(i, i);
            layer["gram_diag"] = std::move(diag);
        } else {
            std::vector<std::vector<double>> dense(dim_, std::vector<double>(dim_));
            for (int r = 0; r < dim_; ++r)
                for (int c = 0; c < dim_; ++c) dense[r][c] = gram(r, c);
            layer["gram"] = std::move(dense);
        }
        const Eigen::VectorXd wr = weights_reward(h);
        const Eigen::VectorXd wc = weights_cost(h);
        layer["w_r"] = std::vector<double>(wr.data(), wr.data() + wr.size());
        layer["w_c"] = std::vector<double>(wc.data(), wc.data() + wc.size());
        layers.push_back(std::move(layer));
    }
    j["layers"] = std::move(layers);
    return j.dump();
}

} // namespace resetfree

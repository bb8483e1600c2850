#include "sptree/baselines/fitted_q.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <sstream>

namespace sptree::baselines {

Mlp::Mlp(std::size_t inputs, std::size_t hidden, std::size_t outputs, Rng& rng)
    : w1_(static_cast<Eigen::Index>(hidden), static_cast<Eigen::Index>(inputs)),
      b1_(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(hidden))),
      w2_(static_cast<Eigen::Index>(outputs), static_cast<Eigen::Index>(hidden)),
      b2_(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(outputs))) {
    // Glorot-uniform initialization.
    const double r1 = std::sqrt(6.0 / static_cast<double>(inputs + hidden));
    const double r2 = std::sqrt(6.0 / static_cast<double>(hidden + outputs));
    for (Eigen::Index j = 0; j < w1_.cols(); ++j) {
        for (Eigen::Index i = 0; i < w1_.rows(); ++i) {
            w1_(i, j) = (2.0 * rng.uniform() - 1.0) * r1;
        }
    }
    for (Eigen::Index j = 0; j < w2_.cols(); ++j) {
        for (Eigen::Index i = 0; i < w2_.rows(); ++i) {
            w2_(i, j) = (2.0 * rng.uniform() - 1.0) * r2;
        }
    }
}

std::size_t Mlp::parameter_count() const noexcept {
    return static_cast<std::size_t>(w1_.size() + b1_.size() + w2_.size() + b2_.size());
}

Eigen::VectorXd Mlp::forward(const Eigen::VectorXd& x) const {
    const Eigen::VectorXd h = (w1_ * x + b1_).array().tanh().matrix();
    return w2_ * h + b2_;
}

Eigen::MatrixXd Mlp::forward(const Eigen::MatrixXd& x) const {
    const Eigen::MatrixXd h = ((w1_ * x).colwise() + b1_).array().tanh().matrix();
    return (w2_ * h).colwise() + b2_;
}

double Mlp::loss(const RegressionBatch& batch) const {
    const Eigen::MatrixXd q = forward(batch.inputs);
    double total = 0.0;
    for (Eigen::Index b = 0; b < q.cols(); ++b) {
        const double err = q(static_cast<Eigen::Index>(batch.actions[static_cast<std::size_t>(b)]), b) - batch.targets(b);
        total += 0.5 * err * err;
    }
    return total / static_cast<double>(q.cols());
}

double Mlp::loss_and_gradient(const RegressionBatch& batch, Eigen::VectorXd& grad) const {
    const auto n = static_cast<double>(batch.inputs.cols());
    const Eigen::MatrixXd h = ((w1_ * batch.inputs).colwise() + b1_).array().tanh().matrix();
    const Eigen::MatrixXd q = (w2_ * h).colwise() + b2_;

    Eigen::MatrixXd dq = Eigen::MatrixXd::Zero(q.rows(), q.cols());
    double total = 0.0;
    for (Eigen::Index b = 0; b < q.cols(); ++b) {
        const auto a = static_cast<Eigen::Index>(batch.actions[static_cast<std::size_t>(b)]);
        const double err = q(a, b) - batch.targets(b);
        total += 0.5 * err * err;
        dq(a, b) = err / n;
    }

    const Eigen::MatrixXd dw2 = dq * h.transpose();
    const Eigen::VectorXd db2 = dq.rowwise().sum();
    const Eigen::MatrixXd dz = ((w2_.transpose() * dq).array() * (1.0 - h.array().square())).matrix();
    const Eigen::MatrixXd dw1 = dz * batch.inputs.transpose();
    const Eigen::VectorXd db1 = dz.rowwise().sum();

    grad.resize(static_cast<Eigen::Index>(parameter_count()));
    Eigen::Index offset = 0;
    for (const Eigen::MatrixXd* m : {&dw1}) {
        grad.segment(offset, m->size()) = Eigen::Map<const Eigen::VectorXd>(m->data(), m->size());
        offset += m->size();
    }
    grad.segment(offset, db1.size()) = db1;
    offset += db1.size();
    grad.segment(offset, dw2.size()) = Eigen::Map<const Eigen::VectorXd>(dw2.data(), dw2.size());
    offset += dw2.size();
    grad.segment(offset, db2.size()) = db2;
    return total / n;
}

Eigen::VectorXd Mlp::parameters() const {
    Eigen::VectorXd flat(static_cast<Eigen::Index>(parameter_count()));
    Eigen::Index offset = 0;
    flat.segment(offset, w1_.size()) = Eigen::Map<const Eigen::VectorXd>(w1_.data(), w1_.size());
    offset += w1_.size();
    flat.segment(offset, b1_.size()) = b1_;
    offset += b1_.size();
    flat.segment(offset, w2_.size()) = Eigen::Map<const Eigen::VectorXd>(w2_.data(), w2_.size());
    offset += w2_.size();
    flat.segment(offset, b2_.size()) = b2_;
    return flat;
}

void Mlp::set_parameters(const Eigen::VectorXd& flat) {
    if (static_cast<std::size_t>(flat.size()) != parameter_count()) {
        throw ContractViolation("parameter vector has the wrong length");
    }
    Eigen::Index offset = 0;
    Eigen::Map<Eigen::VectorXd>(w1_.data(), w1_.size()) = flat.segment(offset, w1_.size());
    offset += w1_.size();
    b1_ = flat.segment(offset, b1_.size());
    offset += b1_.size();
    Eigen::Map<Eigen::VectorXd>(w2_.data(), w2_.size()) = flat.segment(offset, w2_.size());
    offset += w2_.size();
    b2_ = flat.segment(offset, b2_.size());
}

void FittedQConfig::validate() const {
    if (batch_size == 0 || replay_capacity < batch_size || target_refresh == 0 || n_step == 0 || hidden == 0) {
        throw ContractViolation("invalid fitted-Q configuration");
    }
    if (!(learning_rate > 0.0) || !(epsilon_start >= epsilon_end) || epsilon_end < 0.0 || epsilon_start > 1.0) {
        throw ContractViolation("invalid fitted-Q learning rate or exploration schedule");
    }
}

Eigen::VectorXd FittedQModel::features(const StateVector& state) const {
    if (state.size() != state_dimension) {
        throw ContractViolation("state dimension does not match the fitted-Q model");
    }
    Eigen::VectorXd x(static_cast<Eigen::Index>(state.size()));
    for (std::size_t i = 0; i < state.size(); ++i) {
        x(static_cast<Eigen::Index>(i)) = state[i] * input_scale(static_cast<Eigen::Index>(i));
    }
    return x;
}

std::vector<double> FittedQModel::q_values(const StateVector& state) const {
    const Eigen::VectorXd q = net.forward(features(state));
    return {q.data(), q.data() + q.size()};
}

FittedQModel initial_fitted_q(const GenerativeModel& model, const FittedQConfig& config, std::uint64_t seed) {
    config.validate();
    if (model.partially_observable()) {
        throw ContractViolation("fitted-Q training needs a fully observable model");
    }
    FittedQModel out;
    out.config = config;
    out.action_count = model.action_count();
    out.state_dimension = model.state_dimension();

    // Scale each input by its largest magnitude seen under random play, never enlarging it.
    Eigen::VectorXd peak = Eigen::VectorXd::Ones(static_cast<Eigen::Index>(out.state_dimension));
    for (std::size_t e = 0; e < config.scale_episodes; ++e) {
        Rng rng(derive_seed(seed, {stream::kTraining, 0x5ca1e, e}));
        StateVector s = model.initial_state(rng);
        for (std::size_t t = 0; t < 1000; ++t) {
            for (std::size_t i = 0; i < s.size(); ++i) {
                peak(static_cast<Eigen::Index>(i)) = std::max(peak(static_cast<Eigen::Index>(i)), std::fabs(s[i]));
            }
            if (model.is_terminal(s)) {
                break;
            }
            const ActionId a{static_cast<std::size_t>(rng.below(model.action_count()))};
            StepResult r = model.step(s, a, rng);
            s = std::move(r.next_state);
            if (r.done) {
                for (std::size_t i = 0; i < s.size(); ++i) {
                    peak(static_cast<Eigen::Index>(i)) = std::max(peak(static_cast<Eigen::Index>(i)), std::fabs(s[i]));
                }
                break;
            }
        }
    }
    out.input_scale = peak.cwiseInverse();

    Rng init(derive_seed(seed, {stream::kTraining, 0x1417}));
    out.net = Mlp(out.state_dimension, config.hidden, out.action_count, init);
    return out;
}

namespace {

struct Experience {
    Eigen::VectorXd state;
    std::size_t action = 0;
    double n_step_return = 0.0;
    Eigen::VectorXd next_state;
    double bootstrap_discount = 0.0;  // gamma^k, or 0 when the episode ended inside the window
};

class ReplayBuffer {
public:
    explicit ReplayBuffer(std::size_t capacity) : capacity_(capacity) { items_.reserve(capacity); }

    void push(Experience e) {
        if (items_.size() < capacity_) {
            items_.push_back(std::move(e));
        } else {
            items_[next_] = std::move(e);
        }
        next_ = (next_ + 1) % capacity_;
    }
    std::size_t size() const noexcept { return items_.size(); }
    const Experience& operator[](std::size_t i) const { return items_[i]; }

private:
    std::size_t capacity_;
    std::size_t next_ = 0;
    std::vector<Experience> items_;
};

struct Adam {
    Eigen::VectorXd m;
    Eigen::VectorXd v;
    std::size_t t = 0;
    double lr = 1e-3;

    void apply(Eigen::VectorXd& params, const Eigen::VectorXd& grad) {
        constexpr double b1 = 0.9;
        constexpr double b2 = 0.999;
        constexpr double eps = 1e-8;
        if (m.size() == 0) {
            m = Eigen::VectorXd::Zero(params.size());
            v = Eigen::VectorXd::Zero(params.size());
        }
        ++t;
        m = b1 * m + (1.0 - b1) * grad;
        v = b2 * v + (1.0 - b2) * grad.cwiseProduct(grad);
        const double c1 = 1.0 - std::pow(b1, static_cast<double>(t));
        const double c2 = 1.0 - std::pow(b2, static_cast<double>(t));
        params.array() -= lr * (m.array() / c1) / ((v.array() / c2).sqrt() + eps);
    }
};

}  // namespace

FittedQModel fitted_q_train(const GenerativeModel& model, const FittedQConfig& config, std::uint64_t seed) {
    FittedQModel online = initial_fitted_q(model, config, seed);
    if (config.iterations == 0) {
        return online;
    }
    Mlp target = online.net;
    const double gamma = model.discount();

    ReplayBuffer replay(config.replay_capacity);
    Adam adam;
    adam.lr = config.learning_rate;
    Rng explore(derive_seed(seed, {stream::kTraining, 0xe4}));

    struct WindowEntry {
        Eigen::VectorXd state;
        std::size_t action;
        double reward;
    };
    std::deque<WindowEntry> window;
    auto flush_front = [&](const Eigen::VectorXd& next, bool terminal) {
        double ret = 0.0;
        double disc = 1.0;
        for (const auto& w : window) {
            ret += disc * w.reward;
            disc *= gamma;
        }
        replay.push(Experience{window.front().state, window.front().action, ret, next, terminal ? 0.0 : disc});
        window.pop_front();
    };

    std::size_t episode = 0;
    std::size_t t_in_episode = 0;
    Rng episode_rng(derive_seed(seed, {stream::kTraining, episode, 0}));
    StateVector state = model.initial_state(episode_rng);

    const auto explore_steps =
        std::max<std::size_t>(1, static_cast<std::size_t>(config.exploration_fraction * static_cast<double>(config.iterations)));
    double last_loss = 0.0;
    Eigen::VectorXd grad;

    for (std::size_t it = 0; it < config.iterations; ++it) {
        const double frac = std::min(1.0, static_cast<double>(it) / static_cast<double>(explore_steps));
        const double epsilon = config.epsilon_start + frac * (config.epsilon_end - config.epsilon_start);

        const Eigen::VectorXd x = online.features(state);
        ActionId action{};
        const bool random_move = explore.bernoulli(epsilon);
        const auto random_action = static_cast<std::size_t>(explore.below(model.action_count()));
        if (random_move) {
            action = ActionId{random_action};
        } else {
            const Eigen::VectorXd q = online.net.forward(x);
            action = argmax_action(std::span<const double>(q.data(), static_cast<std::size_t>(q.size())));
        }

        Rng step_rng(derive_seed(seed, {stream::kTraining, episode, ++t_in_episode}));
        StepResult r = model.step(state, action, step_rng);
        window.push_back(WindowEntry{x, action.index, r.reward});
        const Eigen::VectorXd next_x = online.features(r.next_state);
        if (r.done) {
            while (!window.empty()) {
                flush_front(next_x, true);
            }
            ++episode;
            t_in_episode = 0;
            Rng init_rng(derive_seed(seed, {stream::kTraining, episode, 0}));
            state = model.initial_state(init_rng);
        } else {
            if (window.size() >= config.n_step) {
                flush_front(next_x, false);
            }
            state = std::move(r.next_state);
        }

        if (replay.size() < std::max(config.batch_size, config.warmup)) {
            continue;
        }

        RegressionBatch batch;
        batch.inputs.resize(static_cast<Eigen::Index>(online.state_dimension), static_cast<Eigen::Index>(config.batch_size));
        Eigen::MatrixXd next(static_cast<Eigen::Index>(online.state_dimension), static_cast<Eigen::Index>(config.batch_size));
        std::vector<const Experience*> picked(config.batch_size);
        batch.actions.resize(config.batch_size);
        for (std::size_t b = 0; b < config.batch_size; ++b) {
            picked[b] = &replay[static_cast<std::size_t>(explore.below(replay.size()))];
            batch.inputs.col(static_cast<Eigen::Index>(b)) = picked[b]->state;
            next.col(static_cast<Eigen::Index>(b)) = picked[b]->next_state;
            batch.actions[b] = picked[b]->action;
        }
        // Double-Q: the online network picks the bootstrap action, the target network values it.
        const Eigen::MatrixXd q_online_next = online.net.forward(next);
        const Eigen::MatrixXd q_target_next = target.forward(next);
        batch.targets.resize(static_cast<Eigen::Index>(config.batch_size));
        for (std::size_t b = 0; b < config.batch_size; ++b) {
            const auto col = static_cast<Eigen::Index>(b);
            Eigen::Index best = 0;
            q_online_next.col(col).maxCoeff(&best);
            batch.targets(col) = picked[b]->n_step_return + picked[b]->bootstrap_discount * q_target_next(best, col);
        }

        const double loss = online.net.loss_and_gradient(batch, grad);
        if (!std::isfinite(loss) || !grad.allFinite()) {
            std::ostringstream msg;
            msg << "fitted-Q loss became non-finite at iteration " << it << " (last finite loss " << last_loss
                << ", parameter norm " << online.net.parameters().norm() << ", replay size " << replay.size() << ")";
            throw TrainingFailure(msg.str());
        }
        last_loss = loss;
        const double norm = grad.norm();
        if (config.gradient_clip > 0.0 && norm > config.gradient_clip) {
            grad *= config.gradient_clip / norm;
        }
        Eigen::VectorXd params = online.net.parameters();
        adam.apply(params, grad);
        online.net.set_parameters(params);

        if ((it + 1) % config.target_refresh == 0) {
            target = online.net;
        }
    }
    return online;
}

FittedQPolicy::FittedQPolicy(std::shared_ptr<const FittedQModel> model) : model_(std::move(model)) {
    if (!model_) {
        throw ContractViolation("null fitted-Q model");
    }
}

std::vector<double> FittedQPolicy::scores(const StateVector& state) const { return model_->q_values(state); }

}  // namespace sptree::baselines

#pragma once

#include <random>
#include <string>
#include <vector>

#include "gsam/tensor.hpp"

namespace gsam {

// A named trainable tensor with a gradient slot and a frozen flag.
struct Parameter {
    std::string name;
    Tensor value;
    Tensor grad;
    bool frozen = false;

    void init(std::vector<int> shape) {
        value = Tensor(std::move(shape));
        grad = Tensor(value.shape());
    }
    void zero_grad() { grad.fill(0.0); }
};

// Flat view over a model's parameters, in construction order. The registry
// does not own the parameters; modules do.
class ParamRegistry {
public:
    void add(Parameter* p) { params_.push_back(p); }
    std::vector<Parameter*>& items() { return params_; }
    const std::vector<Parameter*>& items() const { return params_; }

    Parameter* find(const std::string& name) const;
    void zero_grads();

    long long total_count() const;
    long long learnable_count() const;
    long long frozen_count() const;

private:
    std::vector<Parameter*> params_;
};

// Parameter-name patterns with '*' (any substring) and '?' (any one char).
bool glob_match(const std::string& pattern, const std::string& name);

struct FreezePolicy {
    std::vector<std::string> frozen_name_patterns;
};

// Flags every matching parameter frozen, everything else learnable.
// Returns the patterns that matched nothing (likely typos); the caller
// decides how loudly to surface them.
std::vector<std::string> apply_freeze(ParamRegistry& registry, const FreezePolicy& policy);

// Initializers. All randomness flows through the caller's engine so model
// construction is deterministic given a seed.
void init_normal(Parameter& p, std::mt19937_64& rng, double stddev);
void init_he(Parameter& p, std::mt19937_64& rng, int fan_in);
void init_zero(Parameter& p);
void init_const(Parameter& p, double v);

}  // namespace gsam

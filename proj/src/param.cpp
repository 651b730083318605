#include "gsam/param.hpp"

#include <cmath>

namespace gsam {

Parameter* ParamRegistry::find(const std::string& name) const {
    for (Parameter* p : params_) {
        if (p->name == name) return p;
    }
    return nullptr;
}

void ParamRegistry::zero_grads() {
    for (Parameter* p : params_) p->zero_grad();
}

long long ParamRegistry::total_count() const {
    long long n = 0;
    for (const Parameter* p : params_) n += p->value.size();
    return n;
}

long long ParamRegistry::learnable_count() const {
    long long n = 0;
    for (const Parameter* p : params_)
        if (!p->frozen) n += p->value.size();
    return n;
}

long long ParamRegistry::frozen_count() const {
    long long n = 0;
    for (const Parameter* p : params_)
        if (p->frozen) n += p->value.size();
    return n;
}

bool glob_match(const std::string& pattern, const std::string& name) {
    // Iterative matcher with backtracking over the last '*'.
    size_t p = 0, n = 0;
    size_t star = std::string::npos, star_n = 0;
    while (n < name.size()) {
        if (p < pattern.size() && (pattern[p] == '?' || pattern[p] == name[n])) {
            ++p, ++n;
        } else if (p < pattern.size() && pattern[p] == '*') {
            star = p++;
            star_n = n;
        } else if (star != std::string::npos) {
            p = star + 1;
            n = ++star_n;
        } else {
            return false;
        }
    }
    while (p < pattern.size() && pattern[p] == '*') ++p;
    return p == pattern.size();
}

std::vector<std::string> apply_freeze(ParamRegistry& registry, const FreezePolicy& policy) {
    for (Parameter* p : registry.items()) p->frozen = false;
    std::vector<std::string> unmatched;
    for (const std::string& pat : policy.frozen_name_patterns) {
        bool hit = false;
        for (Parameter* p : registry.items()) {
            if (glob_match(pat, p->name)) {
                p->frozen = true;
                hit = true;
            }
        }
        if (!hit) unmatched.push_back(pat);
    }
    return unmatched;
}

void init_normal(Parameter& p, std::mt19937_64& rng, double stddev) {
    std::normal_distribution<double> dist(0.0, stddev);
    for (long long i = 0; i < p.value.size(); ++i) p.value[i] = dist(rng);
}

void init_he(Parameter& p, std::mt19937_64& rng, int fan_in) {
    init_normal(p, rng, std::sqrt(2.0 / static_cast<double>(fan_in)));
}

void init_zero(Parameter& p) { p.value.fill(0.0); }

void init_const(Parameter& p, double v) { p.value.fill(v); }

}  // namespace gsam

#pragma once

#include "gaitxfer/numerics/rng.hpp"
#include "gaitxfer/numerics/tensor.hpp"

#include <cmath>
#include <map>
#include <stdexcept>
#include <string>

namespace gaitxfer::nx {

/// Named collection of trainable tensors.
///
/// Entries flagged `decay` are weight matrices/kernels and receive the L2
/// weight-decay term; biases and normalization scales do not.
template <class T>
class ParameterSet {
public:
    struct Entry {
        Tensor<T> value;
        bool decay = false;
    };

    Tensor<T>& add(const std::string& name, Tensor<T> value, bool decay)
    {
        auto [it, inserted] = entries_.try_emplace(name, Entry{std::move(value), decay});
        if (!inserted) throw std::invalid_argument("duplicate parameter name '" + name + "'");
        return it->second.value;
    }

    bool contains(const std::string& name) const { return entries_.count(name) != 0; }

    Tensor<T>& operator[](const std::string& name) { return lookup(name).value; }
    const Tensor<T>& operator[](const std::string& name) const { return lookup(name).value; }

    Entry& entry(const std::string& name) { return lookup(name); }
    const Entry& entry(const std::string& name) const { return lookup(name); }

    std::size_t total_count() const
    {
        std::size_t n = 0;
        for (const auto& [_, e] : entries_) n += e.value.size();
        return n;
    }

    std::size_t size() const noexcept { return entries_.size(); }

    auto begin() { return entries_.begin(); }
    auto end() { return entries_.end(); }
    auto begin() const { return entries_.begin(); }
    auto end() const { return entries_.end(); }

    template <class U>
    ParameterSet<U> cast() const
    {
        ParameterSet<U> out;
        for (const auto& [name, e] : entries_) out.add(name, e.value.template cast<U>(), e.decay);
        return out;
    }

    friend bool operator==(const ParameterSet& a, const ParameterSet& b)
    {
        if (a.entries_.size() != b.entries_.size()) return false;
        auto ib = b.entries_.begin();
        for (const auto& [name, e] : a.entries_) {
            if (name != ib->first || e.decay != ib->second.decay || !(e.value == ib->second.value))
                return false;
            ++ib;
        }
        return true;
    }

private:
    Entry& lookup(const std::string& name)
    {
        auto it = entries_.find(name);
        if (it == entries_.end()) throw std::out_of_range("unknown parameter '" + name + "'");
        return it->second;
    }
    const Entry& lookup(const std::string& name) const
    {
        auto it = entries_.find(name);
        if (it == entries_.end()) throw std::out_of_range("unknown parameter '" + name + "'");
        return it->second;
    }

    std::map<std::string, Entry> entries_;
};

/// Gradients keyed by parameter name; shapes mirror the parameters.
template <class T>
using Gradients = std::map<std::string, Tensor<T>>;

/// Fan-in scaled uniform initialization, U(-sqrt(6/fan_in), sqrt(6/fan_in)).
template <class T>
Tensor<T> fan_in_uniform(Shape shape, std::size_t fan_in, Rng& rng)
{
    Tensor<T> t(std::move(shape));
    const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
    for (auto& v : t.data()) v = static_cast<T>(rng.uniform(-bound, bound));
    return t;
}

} // namespace gaitxfer::nx

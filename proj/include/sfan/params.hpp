#pragma once

#include <map>
#include <string>
#include <vector>

#include "sfan/errors.hpp"
#include "sfan/tensor.hpp"

namespace sfan {

// Named parameter tensors with a deterministic iteration order (insertion
// order, which model builders keep fixed).
template <typename T>
class ParamStore {
 public:
  void add(const std::string& name, Tensor4<T> tensor) {
    require(index_.find(name) == index_.end(), Errc::bad_arguments,
            "duplicate parameter name '" + name + "'");
    index_[name] = names_.size();
    names_.push_back(name);
    tensors_.push_back(std::move(tensor));
  }

  bool has(const std::string& name) const { return index_.find(name) != index_.end(); }

  Tensor4<T>& at(const std::string& name) {
    auto it = index_.find(name);
    require(it != index_.end(), Errc::bad_arguments, "unknown parameter '" + name + "'");
    return tensors_[it->second];
  }
  const Tensor4<T>& at(const std::string& name) const {
    auto it = index_.find(name);
    require(it != index_.end(), Errc::bad_arguments, "unknown parameter '" + name + "'");
    return tensors_[it->second];
  }

  const std::vector<std::string>& names() const { return names_; }
  std::size_t size() const { return names_.size(); }

  Tensor4<T>& tensor(std::size_t i) { return tensors_[i]; }
  const Tensor4<T>& tensor(std::size_t i) const { return tensors_[i]; }
  const std::string& name(std::size_t i) const { return names_[i]; }

  std::size_t scalar_count() const {
    std::size_t n = 0;
    for (const auto& t : tensors_) n += t.count();
    return n;
  }

  template <typename U>
  ParamStore<U> cast() const {
    ParamStore<U> out;
    for (std::size_t i = 0; i < names_.size(); ++i)
      out.add(names_[i], tensors_[i].template cast<U>());
    return out;
  }

 private:
  std::vector<std::string> names_;
  std::vector<Tensor4<T>> tensors_;
  std::map<std::string, std::size_t> index_;
};

}  // namespace sfan

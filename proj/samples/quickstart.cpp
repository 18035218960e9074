// Splits a small dummy dataset across clients, aggregates their closed-form
// updates one at a time, and compares the result with centralized training.

#include <cstdio>
#include <numeric>

#include "afl/afl.hpp"

int main() {
  using namespace afl;
  const auto ds = data::gen_dummy(2000, 64, 5, /*seed=*/42);
  const auto part = data::partition(ds, {data::Dirichlet{0.1}, 20, /*seed=*/7});

  const double gamma = 1.0;
  std::vector<ClientUpdate> updates;
  for (const auto& idx : part.clients) {
    updates.push_back(local_train(data::subset(ds, idx), gamma));
  }
  std::vector<std::size_t> order(updates.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  const auto state = aggregate_sequential(updates, order);
  const Matrix w = restore(state);
  const Matrix joint = joint_oracle(ds, 0.0);

  std::printf("clients          %zu\n", state.clients);
  std::printf("delta_w          %.3e\n", harness::delta_w(joint, w));
  std::printf("accuracy (afl)   %.4f\n", harness::accuracy(w, ds));
  std::printf("accuracy (joint) %.4f\n", harness::accuracy(joint, ds));
  return 0;
}

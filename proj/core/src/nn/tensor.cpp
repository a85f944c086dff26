#include "drd/nn/tensor.hpp"

namespace drd::nn {

template class Tensor<float>;
template class Tensor<double>;

}  // namespace drd::nn

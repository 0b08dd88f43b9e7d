#include "xcnn/tape.hpp"

namespace xcnn {

template <typename T>
std::atomic<uint64_t> Tape<T>::next_tape_epoch_{0};

template class Tape<float>;
template class Tape<double>;

}  // namespace xcnn

#include "detkit/error.hpp"

#include <utility>

namespace detkit {

DataError::DataError(const std::string& what, std::string where)
    : Error(where.empty() ? what : where + ": " + what), where_(std::move(where)) {}

DegenerateBoxes::DegenerateBoxes()
    : InvalidArgument("iou: both boxes have zero area") {}

}  // namespace detkit

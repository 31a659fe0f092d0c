from calc import total

assert total([1, 2, 3]) == 6
assert total([7]) == 7
assert total([]) == 0
print("ok")

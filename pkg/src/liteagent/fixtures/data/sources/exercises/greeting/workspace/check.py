from greeting import greeting

assert greeting("World") == "Hello, World!"
assert greeting("Ada") == "Hello, Ada!"
print("ok")

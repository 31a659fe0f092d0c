def greeting(name):
    return "Hi"

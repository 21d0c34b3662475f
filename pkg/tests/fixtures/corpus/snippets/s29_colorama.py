import colorama

colorama.init()
print('ok')

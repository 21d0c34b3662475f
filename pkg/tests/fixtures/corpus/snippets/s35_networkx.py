import networkx

g = networkx.Graph()
g.add_edge(1, 2)
print(g.number_of_edges())

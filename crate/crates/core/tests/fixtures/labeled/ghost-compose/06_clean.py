from qiskit import ClassicalRegister, QuantumCircuit, QuantumRegister, transpile

oracle = QuantumCircuit(3)
oracle.ccx(0, 1, 2)
grover = QuantumCircuit(3, 3)
for i in range(3):
    grover.h(i)
full = grover.compose(oracle, [0, 1, 2])
full.measure([0, 1, 2], [0, 1, 2])

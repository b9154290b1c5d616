from qiskit import ClassicalRegister, QuantumCircuit, QuantumRegister, transpile

base = QuantumCircuit(2, 2)
base.h(0)
tail = QuantumCircuit(2)
tail.cx(0, 1)
base.compose(tail, inplace=True)
base.measure([0, 1], [0, 1])

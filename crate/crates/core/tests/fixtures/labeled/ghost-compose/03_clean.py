from qiskit import ClassicalRegister, QuantumCircuit, QuantumRegister, transpile

layer = QuantumCircuit(2)
layer.cx(0, 1)
qc = QuantumCircuit(2, 2)
qc.h(0)
qc.h(1)
for _ in range(2):
    qc = qc.compose(layer)
qc.measure([0, 1], [0, 1])

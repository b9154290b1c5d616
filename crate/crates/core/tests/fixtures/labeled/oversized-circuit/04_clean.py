from qiskit import ClassicalRegister, QuantumCircuit, QuantumRegister, transpile

qc = QuantumCircuit(4, 4)
for i in range(4):
    qc.h(i)
    qc.measure(i, i)
